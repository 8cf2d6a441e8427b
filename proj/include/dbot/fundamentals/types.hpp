#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dbot::fundamentals {

struct CompanyIdentity {
    std::string name;
    std::string ticker;           // non-empty, uppercase, <= 12 chars
    std::string listing_currency; // ISO-4217
    std::string country;          // ISO-3166 alpha-2
};

// Canonical fundamentals document for one company at one as_of date. Loaded
// from fixtures or a provider adapter; immutable after validation.
struct FundamentalsSnapshot {
    CompanyIdentity identity;
    std::string as_of;                   // ISO-8601 date
    std::vector<double> revenue_history; // 2..8 entries, oldest first, all > 0
    double ebit = 0.0;
    double depreciation_amortization = 0.0; // optional in the document, default 0
    double effective_tax_rate = 0.0;
    double total_debt = 0.0;
    double cash_and_nonoperating = 0.0;
    double invested_capital = 0.0;
    double shares_outstanding = 0.0;
    double market_price = 0.0;
};

struct ConsensusEstimates {
    std::string as_of;
    double revenue_growth_y1 = 0.0;
    double revenue_growth_y2 = 0.0;
    double operating_margin_fwd = 0.0;
    int analyst_count = 0;
    std::optional<double> median_target_price;
};

struct PeerComparable {
    CompanyIdentity identity;
    double ev_to_ebitda = 0.0;
    double revenue_growth = 0.0;
    double operating_margin = 0.0;
};

struct ComparablesSet {
    std::vector<PeerComparable> peers; // non-empty, unique tickers
};

std::vector<std::string> check_identity(const CompanyIdentity& identity);
std::vector<std::string> check_snapshot(const FundamentalsSnapshot& snapshot, const std::string& run_clock_today);
std::vector<std::string> check_consensus(const ConsensusEstimates& consensus);
std::vector<std::string> check_comparables(const ComparablesSet& comparables);

// Returns the snapshot unchanged iff every invariant holds; throws
// SchemaViolation listing every failed invariant otherwise.
const FundamentalsSnapshot& validate_snapshot(const FundamentalsSnapshot& snapshot,
                                              const std::string& run_clock_today);

void to_json(nlohmann::json& j, const CompanyIdentity& v);
void from_json(const nlohmann::json& j, CompanyIdentity& v);
void to_json(nlohmann::json& j, const FundamentalsSnapshot& v);
void from_json(const nlohmann::json& j, FundamentalsSnapshot& v);
void to_json(nlohmann::json& j, const ConsensusEstimates& v);
void from_json(const nlohmann::json& j, ConsensusEstimates& v);
void to_json(nlohmann::json& j, const PeerComparable& v);
void from_json(const nlohmann::json& j, PeerComparable& v);
void to_json(nlohmann::json& j, const ComparablesSet& v);
void from_json(const nlohmann::json& j, ComparablesSet& v);

} // namespace dbot::fundamentals
