#include "dbot/valuation/types.hpp"

#include <cmath>
#include <sstream>

#include "dbot/error.hpp"

namespace dbot::valuation {

namespace {

bool finite(double v) { return std::isfinite(v); }

template <typename Array>
bool all_finite(const Array& values) {
    for (double v : values)
        if (!finite(v)) return false;
    return true;
}

} // namespace

std::vector<std::string> check_macro(const MacroInputs& macro) {
    std::vector<std::string> failures;
    if (!(macro.marginal_tax_rate >= 0.0 && macro.marginal_tax_rate < 1.0))
        failures.push_back("marginal_tax_rate must be in [0, 1)");
    if (!(macro.risk_free_rate > -0.05)) failures.push_back("risk_free_rate must be > -0.05");
    if (!finite(macro.equity_risk_premium)) failures.push_back("equity_risk_premium must be finite");
    return failures;
}

std::vector<std::string> check_drivers(const ValueDrivers& drivers, const MacroInputs& macro) {
    std::vector<std::string> failures;
    if (!all_finite(drivers.revenue_growth) || !all_finite(drivers.operating_margin) ||
        !all_finite(drivers.sales_to_capital) || !all_finite(drivers.cost_of_capital) ||
        !finite(drivers.terminal_growth) || !finite(drivers.terminal_margin) ||
        !finite(drivers.terminal_cost_of_capital))
        failures.push_back("all driver values must be finite");
    if (drivers.terminal_growth > macro.risk_free_rate)
        failures.push_back("terminal_growth must not exceed the risk-free rate");
    if (!(drivers.terminal_cost_of_capital > drivers.terminal_growth))
        failures.push_back("terminal_cost_of_capital must exceed terminal_growth");
    for (int t = 0; t < kHorizonYears; ++t) {
        if (!(drivers.sales_to_capital[static_cast<std::size_t>(t)] > 0.0)) {
            failures.push_back("sales_to_capital must be > 0 in every year");
            break;
        }
    }
    for (int t = 0; t < kHorizonYears; ++t) {
        double m = drivers.operating_margin[static_cast<std::size_t>(t)];
        if (!(m > -1.0 && m < 1.0)) {
            failures.push_back("operating_margin must lie in (-1, 1) in every year");
            break;
        }
    }
    if (!(drivers.terminal_margin > -1.0 && drivers.terminal_margin < 1.0))
        failures.push_back("terminal_margin must lie in (-1, 1)");
    for (int t = 0; t < kHorizonYears; ++t) {
        if (drivers.cost_of_capital[static_cast<std::size_t>(t)] <= -1.0) {
            failures.push_back("cost_of_capital must be > -1 in every year");
            break;
        }
    }
    return failures;
}

std::vector<std::string> check_financials(const BaseFinancials& financials) {
    std::vector<std::string> failures;
    if (!(financials.base_revenue >= 0.0)) failures.push_back("base_revenue must be >= 0");
    if (!(financials.shares_outstanding > 0.0)) failures.push_back("shares_outstanding must be > 0");
    if (!(financials.effective_tax_rate >= 0.0 && financials.effective_tax_rate < 1.0))
        failures.push_back("effective_tax_rate must be in [0, 1)");
    if (!(financials.depreciation_amortization >= 0.0))
        failures.push_back("depreciation_amortization must be >= 0");
    for (double v : {financials.base_revenue, financials.base_ebit, financials.total_debt,
                     financials.cash_and_nonoperating, financials.shares_outstanding, financials.market_price})
        if (!finite(v)) {
            failures.push_back("all financial fields must be finite");
            break;
        }
    return failures;
}

std::vector<std::string> check_inputs(const ValuationInputs& inputs) {
    std::vector<std::string> failures = check_macro(inputs.macro);
    auto f2 = check_financials(inputs.financials);
    auto f3 = check_drivers(inputs.drivers, inputs.macro);
    failures.insert(failures.end(), f2.begin(), f2.end());
    failures.insert(failures.end(), f3.begin(), f3.end());
    return failures;
}

void require_valid(const ValuationInputs& inputs) {
    auto failures = check_inputs(inputs);
    if (failures.empty()) return;
    std::ostringstream msg;
    msg << "ValuationInputs for " << inputs.identity.ticker << ": ";
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (i) msg << "; ";
        msg << failures[i];
    }
    raise(ErrorCode::InvariantViolation, msg.str());
}

void to_json(nlohmann::json& j, const MacroInputs& v) {
    j = nlohmann::json{{"risk_free_rate", v.risk_free_rate},
                       {"equity_risk_premium", v.equity_risk_premium},
                       {"marginal_tax_rate", v.marginal_tax_rate}};
}

void from_json(const nlohmann::json& j, MacroInputs& v) {
    j.at("risk_free_rate").get_to(v.risk_free_rate);
    j.at("equity_risk_premium").get_to(v.equity_risk_premium);
    j.at("marginal_tax_rate").get_to(v.marginal_tax_rate);
}

void to_json(nlohmann::json& j, const ValueDrivers& v) {
    j = nlohmann::json{{"revenue_growth", v.revenue_growth},
                       {"terminal_growth", v.terminal_growth},
                       {"operating_margin", v.operating_margin},
                       {"terminal_margin", v.terminal_margin},
                       {"sales_to_capital", v.sales_to_capital},
                       {"cost_of_capital", v.cost_of_capital},
                       {"terminal_cost_of_capital", v.terminal_cost_of_capital}};
}

void from_json(const nlohmann::json& j, ValueDrivers& v) {
    j.at("revenue_growth").get_to(v.revenue_growth);
    j.at("terminal_growth").get_to(v.terminal_growth);
    j.at("operating_margin").get_to(v.operating_margin);
    j.at("terminal_margin").get_to(v.terminal_margin);
    j.at("sales_to_capital").get_to(v.sales_to_capital);
    j.at("cost_of_capital").get_to(v.cost_of_capital);
    j.at("terminal_cost_of_capital").get_to(v.terminal_cost_of_capital);
}

void to_json(nlohmann::json& j, const BaseFinancials& v) {
    j = nlohmann::json{{"base_revenue", v.base_revenue},
                       {"base_ebit", v.base_ebit},
                       {"effective_tax_rate", v.effective_tax_rate},
                       {"depreciation_amortization", v.depreciation_amortization},
                       {"total_debt", v.total_debt},
                       {"cash_and_nonoperating", v.cash_and_nonoperating},
                       {"shares_outstanding", v.shares_outstanding},
                       {"market_price", v.market_price}};
}

void from_json(const nlohmann::json& j, BaseFinancials& v) {
    j.at("base_revenue").get_to(v.base_revenue);
    j.at("base_ebit").get_to(v.base_ebit);
    j.at("effective_tax_rate").get_to(v.effective_tax_rate);
    v.depreciation_amortization = j.value("depreciation_amortization", 0.0);
    j.at("total_debt").get_to(v.total_debt);
    j.at("cash_and_nonoperating").get_to(v.cash_and_nonoperating);
    j.at("shares_outstanding").get_to(v.shares_outstanding);
    j.at("market_price").get_to(v.market_price);
}

void to_json(nlohmann::json& j, const ValuationInputs& v) {
    j = nlohmann::json{{"identity", v.identity}, {"financials", v.financials}, {"drivers", v.drivers},
                       {"macro", v.macro},       {"revision", v.revision},     {"provenance", v.provenance}};
}

void from_json(const nlohmann::json& j, ValuationInputs& v) {
    j.at("identity").get_to(v.identity);
    j.at("financials").get_to(v.financials);
    j.at("drivers").get_to(v.drivers);
    j.at("macro").get_to(v.macro);
    j.at("revision").get_to(v.revision);
    j.at("provenance").get_to(v.provenance);
}

void to_json(nlohmann::json& j, const CashflowRow& v) {
    j = nlohmann::json{{"year", v.year},
                       {"revenue", v.revenue},
                       {"ebit", v.ebit},
                       {"tax", v.tax},
                       {"nopat", v.nopat},
                       {"reinvestment", v.reinvestment},
                       {"fcff", v.fcff},
                       {"cumulative_discount_factor", v.cumulative_discount_factor},
                       {"present_value", v.present_value}};
}

void from_json(const nlohmann::json& j, CashflowRow& v) {
    j.at("year").get_to(v.year);
    j.at("revenue").get_to(v.revenue);
    j.at("ebit").get_to(v.ebit);
    j.at("tax").get_to(v.tax);
    j.at("nopat").get_to(v.nopat);
    j.at("reinvestment").get_to(v.reinvestment);
    j.at("fcff").get_to(v.fcff);
    j.at("cumulative_discount_factor").get_to(v.cumulative_discount_factor);
    j.at("present_value").get_to(v.present_value);
}

void to_json(nlohmann::json& j, const CashflowTable& v) { j = nlohmann::json{{"rows", v.rows}}; }

void from_json(const nlohmann::json& j, CashflowTable& v) { j.at("rows").get_to(v.rows); }

void to_json(nlohmann::json& j, const ValuationResult& v) {
    j = nlohmann::json{{"enterprise_value", v.enterprise_value},
                       {"equity_value", v.equity_value},
                       {"value_per_share", v.value_per_share},
                       {"pv_explicit", v.pv_explicit},
                       {"pv_terminal", v.pv_terminal},
                       {"terminal_value", v.terminal_value},
                       {"terminal_ev_to_ebitda", v.terminal_ev_to_ebitda},
                       {"price_to_value", v.price_to_value},
                       {"table", v.table}};
}

void from_json(const nlohmann::json& j, ValuationResult& v) {
    j.at("enterprise_value").get_to(v.enterprise_value);
    j.at("equity_value").get_to(v.equity_value);
    j.at("value_per_share").get_to(v.value_per_share);
    j.at("pv_explicit").get_to(v.pv_explicit);
    j.at("pv_terminal").get_to(v.pv_terminal);
    j.at("terminal_value").get_to(v.terminal_value);
    j.at("terminal_ev_to_ebitda").get_to(v.terminal_ev_to_ebitda);
    j.at("price_to_value").get_to(v.price_to_value);
    j.at("table").get_to(v.table);
}

void to_json(nlohmann::json& j, const SensitivityAxis& v) {
    j = nlohmann::json{{"driver", v.driver}, {"values", v.values}};
}

void from_json(const nlohmann::json& j, SensitivityAxis& v) {
    j.at("driver").get_to(v.driver);
    j.at("values").get_to(v.values);
}

void to_json(nlohmann::json& j, const SensitivityTable& v) {
    j = nlohmann::json{{"row_axis", v.row_axis}, {"col_axis", v.col_axis}, {"cells", v.cells}};
}

void from_json(const nlohmann::json& j, SensitivityTable& v) {
    j.at("row_axis").get_to(v.row_axis);
    j.at("col_axis").get_to(v.col_axis);
    j.at("cells").get_to(v.cells);
}

} // namespace dbot::valuation
