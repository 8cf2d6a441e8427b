#include "dbot/fundamentals/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "dbot/error.hpp"
#include "dbot/util/dates.hpp"

namespace dbot::fundamentals {

namespace {

bool all_upper_alpha(const std::string& text) {
    return !text.empty() && std::all_of(text.begin(), text.end(), [](unsigned char c) {
        return std::isupper(c) || std::isdigit(c) || c == '.';
    });
}

bool is_finite(double v) { return std::isfinite(v); }

void throw_schema(const std::vector<std::string>& failures, const std::string& what) {
    std::ostringstream msg;
    msg << what << " failed " << failures.size() << " invariant(s): ";
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (i) msg << "; ";
        msg << failures[i];
    }
    raise(ErrorCode::SchemaViolation, msg.str());
}

} // namespace

std::vector<std::string> check_identity(const CompanyIdentity& identity) {
    std::vector<std::string> failures;
    if (identity.ticker.empty() || identity.ticker.size() > 12 || !all_upper_alpha(identity.ticker))
        failures.push_back("ticker must be non-empty, uppercase, <= 12 chars");
    if (identity.listing_currency.size() != 3 || !all_upper_alpha(identity.listing_currency))
        failures.push_back("listing_currency must be an ISO-4217 code");
    if (identity.country.size() != 2 || !all_upper_alpha(identity.country))
        failures.push_back("country must be an ISO-3166 alpha-2 code");
    return failures;
}

std::vector<std::string> check_snapshot(const FundamentalsSnapshot& snapshot, const std::string& run_clock_today) {
    std::vector<std::string> failures = check_identity(snapshot.identity);
    if (!util::is_iso_date(snapshot.as_of)) failures.push_back("as_of must be an ISO-8601 date");
    else if (!run_clock_today.empty() && snapshot.as_of > run_clock_today)
        failures.push_back("as_of " + snapshot.as_of + " is in the future relative to run clock " + run_clock_today);
    if (snapshot.revenue_history.size() < 2 || snapshot.revenue_history.size() > 8)
        failures.push_back("revenue_history must have 2..8 entries");
    for (double r : snapshot.revenue_history) {
        if (!is_finite(r) || r <= 0.0) {
            failures.push_back("revenue_history entries must be finite and > 0");
            break;
        }
    }
    for (const auto& [name, v] : {std::pair<const char*, double>{"ebit", snapshot.ebit},
                                  {"depreciation_amortization", snapshot.depreciation_amortization},
                                  {"total_debt", snapshot.total_debt},
                                  {"cash_and_nonoperating", snapshot.cash_and_nonoperating},
                                  {"invested_capital", snapshot.invested_capital},
                                  {"shares_outstanding", snapshot.shares_outstanding},
                                  {"market_price", snapshot.market_price}}) {
        if (!is_finite(v)) failures.push_back(std::string(name) + " must be finite");
    }
    if (snapshot.effective_tax_rate < 0.0 || snapshot.effective_tax_rate >= 1.0)
        failures.push_back("effective_tax_rate must be in [0, 1)");
    if (snapshot.invested_capital <= 0.0) failures.push_back("invested_capital must be > 0");
    if (snapshot.shares_outstanding <= 0.0) failures.push_back("shares_outstanding must be > 0");
    if (snapshot.market_price <= 0.0) failures.push_back("market_price must be > 0");
    if (snapshot.depreciation_amortization < 0.0) failures.push_back("depreciation_amortization must be >= 0");
    return failures;
}

std::vector<std::string> check_consensus(const ConsensusEstimates& consensus) {
    std::vector<std::string> failures;
    if (!util::is_iso_date(consensus.as_of)) failures.push_back("as_of must be an ISO-8601 date");
    const bool any_estimate = consensus.revenue_growth_y1 != 0.0 || consensus.revenue_growth_y2 != 0.0 ||
                              consensus.operating_margin_fwd != 0.0 || consensus.median_target_price.has_value();
    if (any_estimate && consensus.analyst_count < 1)
        failures.push_back("analyst_count must be >= 1 when any estimate is present");
    return failures;
}

std::vector<std::string> check_comparables(const ComparablesSet& comparables) {
    std::vector<std::string> failures;
    if (comparables.peers.empty()) failures.push_back("peers must be non-empty");
    std::set<std::string> tickers;
    for (const auto& peer : comparables.peers) {
        auto id_failures = check_identity(peer.identity);
        failures.insert(failures.end(), id_failures.begin(), id_failures.end());
        if (!tickers.insert(peer.identity.ticker).second)
            failures.push_back("duplicate peer ticker " + peer.identity.ticker);
    }
    return failures;
}

const FundamentalsSnapshot& validate_snapshot(const FundamentalsSnapshot& snapshot,
                                              const std::string& run_clock_today) {
    auto failures = check_snapshot(snapshot, run_clock_today);
    if (!failures.empty()) throw_schema(failures, "FundamentalsSnapshot");
    return snapshot;
}

void to_json(nlohmann::json& j, const CompanyIdentity& v) {
    j = nlohmann::json{{"name", v.name},
                       {"ticker", v.ticker},
                       {"listing_currency", v.listing_currency},
                       {"country", v.country}};
}

void from_json(const nlohmann::json& j, CompanyIdentity& v) {
    j.at("name").get_to(v.name);
    j.at("ticker").get_to(v.ticker);
    j.at("listing_currency").get_to(v.listing_currency);
    j.at("country").get_to(v.country);
}

void to_json(nlohmann::json& j, const FundamentalsSnapshot& v) {
    j = nlohmann::json{{"identity", v.identity},
                       {"as_of", v.as_of},
                       {"revenue_history", v.revenue_history},
                       {"ebit", v.ebit},
                       {"depreciation_amortization", v.depreciation_amortization},
                       {"effective_tax_rate", v.effective_tax_rate},
                       {"total_debt", v.total_debt},
                       {"cash_and_nonoperating", v.cash_and_nonoperating},
                       {"invested_capital", v.invested_capital},
                       {"shares_outstanding", v.shares_outstanding},
                       {"market_price", v.market_price}};
}

void from_json(const nlohmann::json& j, FundamentalsSnapshot& v) {
    static const char* required[] = {"identity",   "as_of",      "revenue_history",    "ebit",
                                     "effective_tax_rate",       "total_debt",         "cash_and_nonoperating",
                                     "invested_capital",         "shares_outstanding", "market_price"};
    for (const char* field : required) {
        if (!j.contains(field))
            raise(ErrorCode::SchemaViolation, std::string("fundamentals document missing required field \"") + field + "\"");
    }
    j.at("identity").get_to(v.identity);
    j.at("as_of").get_to(v.as_of);
    j.at("revenue_history").get_to(v.revenue_history);
    j.at("ebit").get_to(v.ebit);
    v.depreciation_amortization = j.value("depreciation_amortization", 0.0);
    j.at("effective_tax_rate").get_to(v.effective_tax_rate);
    j.at("total_debt").get_to(v.total_debt);
    j.at("cash_and_nonoperating").get_to(v.cash_and_nonoperating);
    j.at("invested_capital").get_to(v.invested_capital);
    j.at("shares_outstanding").get_to(v.shares_outstanding);
    j.at("market_price").get_to(v.market_price);
}

void to_json(nlohmann::json& j, const ConsensusEstimates& v) {
    j = nlohmann::json{{"as_of", v.as_of},
                       {"revenue_growth_y1", v.revenue_growth_y1},
                       {"revenue_growth_y2", v.revenue_growth_y2},
                       {"operating_margin_fwd", v.operating_margin_fwd},
                       {"analyst_count", v.analyst_count}};
    if (v.median_target_price) j["median_target_price"] = *v.median_target_price;
}

void from_json(const nlohmann::json& j, ConsensusEstimates& v) {
    j.at("as_of").get_to(v.as_of);
    v.revenue_growth_y1 = j.value("revenue_growth_y1", 0.0);
    v.revenue_growth_y2 = j.value("revenue_growth_y2", 0.0);
    v.operating_margin_fwd = j.value("operating_margin_fwd", 0.0);
    v.analyst_count = j.value("analyst_count", 0);
    if (j.contains("median_target_price") && !j.at("median_target_price").is_null())
        v.median_target_price = j.at("median_target_price").get<double>();
    else
        v.median_target_price.reset();
}

void to_json(nlohmann::json& j, const PeerComparable& v) {
    j = nlohmann::json{{"identity", v.identity},
                       {"ev_to_ebitda", v.ev_to_ebitda},
                       {"revenue_growth", v.revenue_growth},
                       {"operating_margin", v.operating_margin}};
}

void from_json(const nlohmann::json& j, PeerComparable& v) {
    j.at("identity").get_to(v.identity);
    j.at("ev_to_ebitda").get_to(v.ev_to_ebitda);
    v.revenue_growth = j.value("revenue_growth", 0.0);
    v.operating_margin = j.value("operating_margin", 0.0);
}

void to_json(nlohmann::json& j, const ComparablesSet& v) { j = nlohmann::json{{"peers", v.peers}}; }

void from_json(const nlohmann::json& j, ComparablesSet& v) { j.at("peers").get_to(v.peers); }

} // namespace dbot::fundamentals
