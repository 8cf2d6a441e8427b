#pragma once

#include <array>
#include <string>
#include <vector>

#include "dbot/fundamentals/types.hpp"

#include <nlohmann/json.hpp>

namespace dbot::valuation {

inline constexpr int kHorizonYears = 10;

struct MacroInputs {
    double risk_free_rate = 0.0;      // fraction/year
    double equity_risk_premium = 0.0; // fraction/year
    double marginal_tax_rate = 0.0;   // fraction
};

// The four Damodaran value drivers over the explicit 10-year horizon plus
// their terminal-state counterparts. Reinvestment efficiency is expressed as
// the sales-to-capital ratio.
struct ValueDrivers {
    std::array<double, kHorizonYears> revenue_growth{};
    double terminal_growth = 0.0;
    std::array<double, kHorizonYears> operating_margin{};
    double terminal_margin = 0.0;
    std::array<double, kHorizonYears> sales_to_capital{};
    std::array<double, kHorizonYears> cost_of_capital{};
    double terminal_cost_of_capital = 0.0;
};

struct BaseFinancials {
    double base_revenue = 0.0;
    double base_ebit = 0.0;
    double effective_tax_rate = 0.0;
    double depreciation_amortization = 0.0; // EBITDA proxy, 0 when statements lack D&A
    double total_debt = 0.0;
    double cash_and_nonoperating = 0.0;
    double shares_outstanding = 0.0;
    double market_price = 0.0;
};

// The single mutable state of a run (the spreadsheet). Mutation happens only
// through patch application, which bumps `revision` and appends to
// `provenance`; everything else treats it as an immutable value.
struct ValuationInputs {
    fundamentals::CompanyIdentity identity;
    BaseFinancials financials;
    ValueDrivers drivers;
    MacroInputs macro;
    std::uint64_t revision = 0;
    std::vector<std::string> provenance;
};

struct CashflowRow {
    int year = 0; // 1-based forecast year
    double revenue = 0.0;
    double ebit = 0.0;
    double tax = 0.0;
    double nopat = 0.0;
    double reinvestment = 0.0;
    double fcff = 0.0;
    double cumulative_discount_factor = 0.0;
    double present_value = 0.0;
};

struct CashflowTable {
    std::array<CashflowRow, kHorizonYears> rows{};
};

struct ValuationResult {
    double enterprise_value = 0.0;
    double equity_value = 0.0;
    double value_per_share = 0.0;
    double pv_explicit = 0.0;
    double pv_terminal = 0.0;
    double terminal_value = 0.0;
    double terminal_ev_to_ebitda = 0.0; // 0 when terminal EBITDA is not positive
    double price_to_value = 0.0;
    CashflowTable table;
};

struct SensitivityAxis {
    std::string driver; // driver path, or a bare array name for a uniform override
    std::vector<double> values;
};

struct SensitivityTable {
    SensitivityAxis row_axis;
    SensitivityAxis col_axis;
    std::vector<std::vector<double>> cells; // value_per_share, rows x cols
};

// Validation. Each returns the list of violated invariants (empty = valid);
// the require_* forms throw InvariantViolation listing every failure.
std::vector<std::string> check_macro(const MacroInputs& macro);
std::vector<std::string> check_drivers(const ValueDrivers& drivers, const MacroInputs& macro);
std::vector<std::string> check_financials(const BaseFinancials& financials);
std::vector<std::string> check_inputs(const ValuationInputs& inputs);
void require_valid(const ValuationInputs& inputs);

void to_json(nlohmann::json& j, const MacroInputs& v);
void from_json(const nlohmann::json& j, MacroInputs& v);
void to_json(nlohmann::json& j, const ValueDrivers& v);
void from_json(const nlohmann::json& j, ValueDrivers& v);
void to_json(nlohmann::json& j, const BaseFinancials& v);
void from_json(const nlohmann::json& j, BaseFinancials& v);
void to_json(nlohmann::json& j, const ValuationInputs& v);
void from_json(const nlohmann::json& j, ValuationInputs& v);
void to_json(nlohmann::json& j, const CashflowRow& v);
void from_json(const nlohmann::json& j, CashflowRow& v);
void to_json(nlohmann::json& j, const CashflowTable& v);
void from_json(const nlohmann::json& j, CashflowTable& v);
void to_json(nlohmann::json& j, const ValuationResult& v);
void from_json(const nlohmann::json& j, ValuationResult& v);
void to_json(nlohmann::json& j, const SensitivityAxis& v);
void from_json(const nlohmann::json& j, SensitivityAxis& v);
void to_json(nlohmann::json& j, const SensitivityTable& v);
void from_json(const nlohmann::json& j, SensitivityTable& v);

} // namespace dbot::valuation
