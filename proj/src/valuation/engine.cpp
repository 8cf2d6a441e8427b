#include "dbot/valuation/engine.hpp"

#include <algorithm>
#include <cmath>

#include "dbot/error.hpp"
#include "dbot/valuation/driver_paths.hpp"

namespace dbot::valuation {

namespace {

// Effective rate through year 5, then a straight-line walk to the marginal
// rate by year 10.
double tax_rate_for_year(int year, double effective_rate, double marginal_rate) {
    if (year <= 5) return effective_rate;
    return effective_rate + (marginal_rate - effective_rate) * static_cast<double>(year - 5) / 5.0;
}

double taxes_on(double ebit, double rate) { return ebit > 0.0 ? ebit * rate : 0.0; }

void apply_axis_override(ValuationInputs& inputs, const std::string& driver, double v) {
    if (is_bare_driver_array(driver)) {
        for (int year = 1; year <= kHorizonYears; ++year)
            set_value_at(inputs, driver + "[" + std::to_string(year) + "]", v);
        return;
    }
    if (!is_driver_path(driver))
        raise(ErrorCode::UnknownDriver, "sensitivity axis \"" + driver + "\" does not name a value driver");
    set_value_at(inputs, driver, v);
}

} // namespace

ValuationResult value(const ValuationInputs& inputs) {
    if (inputs.financials.shares_outstanding == 0.0)
        raise(ErrorCode::DegenerateInput, "shares_outstanding is zero");
    require_valid(inputs);

    const ValueDrivers& d = inputs.drivers;
    const BaseFinancials& f = inputs.financials;

    ValuationResult result;
    double prev_revenue = f.base_revenue;
    double cumulative_df = 1.0;
    double pv_explicit = 0.0;

    for (int t = 0; t < kHorizonYears; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const int year = t + 1;
        CashflowRow& row = result.table.rows[i];
        row.year = year;
        row.revenue = prev_revenue * (1.0 + d.revenue_growth[i]);
        row.ebit = row.revenue * d.operating_margin[i];
        row.tax = taxes_on(row.ebit, tax_rate_for_year(year, f.effective_tax_rate, inputs.macro.marginal_tax_rate));
        row.nopat = row.ebit - row.tax;
        const double revenue_delta = row.revenue - prev_revenue;
        row.reinvestment = revenue_delta > 0.0 ? revenue_delta / d.sales_to_capital[i] : 0.0;
        row.fcff = row.nopat - row.reinvestment;
        cumulative_df /= 1.0 + d.cost_of_capital[i];
        row.cumulative_discount_factor = cumulative_df;
        row.present_value = row.fcff * cumulative_df;
        pv_explicit += row.present_value;
        prev_revenue = row.revenue;
    }

    const double terminal_revenue = prev_revenue * (1.0 + d.terminal_growth);
    const double terminal_ebit = terminal_revenue * d.terminal_margin;
    const double terminal_nopat = terminal_ebit - taxes_on(terminal_ebit, inputs.macro.marginal_tax_rate);
    // Terminal ROIC = terminal cost of capital, so reinvestment in perpetuity
    // consumes exactly g/ROIC of NOPAT.
    const double terminal_reinvestment_rate = d.terminal_growth / d.terminal_cost_of_capital;
    result.terminal_value = terminal_nopat * (1.0 - terminal_reinvestment_rate) /
                            (d.terminal_cost_of_capital - d.terminal_growth);
    result.pv_explicit = pv_explicit;
    result.pv_terminal = result.terminal_value * cumulative_df;
    result.enterprise_value = result.pv_explicit + result.pv_terminal;
    result.equity_value = result.enterprise_value - f.total_debt + f.cash_and_nonoperating;
    result.value_per_share = result.equity_value / f.shares_outstanding;
    result.price_to_value = result.value_per_share != 0.0 ? f.market_price / result.value_per_share : 0.0;

    const double terminal_ebitda = terminal_ebit + f.depreciation_amortization;
    if (result.terminal_value == 0.0)
        result.terminal_ev_to_ebitda = 0.0;
    else
        result.terminal_ev_to_ebitda = terminal_ebitda > 0.0 ? result.terminal_value / terminal_ebitda : 0.0;
    return result;
}

ValueDrivers derive_base_anchors(const fundamentals::FundamentalsSnapshot& snapshot, const MacroInputs& macro) {
    const std::size_t n = snapshot.revenue_history.size();
    if (n < 2)
        raise(ErrorCode::InsufficientHistory,
              "need at least 2 revenue observations, got " + std::to_string(n));

    const double oldest = snapshot.revenue_history.front();
    const double latest = snapshot.revenue_history.back();
    const double years = static_cast<double>(n - 1);
    const double cagr = std::pow(latest / oldest, 1.0 / years) - 1.0;

    const double growth_y1 = std::clamp(cagr, -0.50, 1.00);
    const double margin_y1 = std::clamp(snapshot.ebit / latest, -0.99, 0.99);
    const double sales_to_capital = latest / snapshot.invested_capital;
    const double cost_of_capital = macro.risk_free_rate + macro.equity_risk_premium;

    ValueDrivers drivers;
    drivers.terminal_growth = macro.risk_free_rate;
    drivers.terminal_margin = margin_y1;
    drivers.terminal_cost_of_capital = cost_of_capital;
    for (int t = 0; t < kHorizonYears; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const double blend = static_cast<double>(t) / (kHorizonYears - 1);
        drivers.revenue_growth[i] = growth_y1 + (drivers.terminal_growth - growth_y1) * blend;
        drivers.operating_margin[i] = margin_y1 + (drivers.terminal_margin - margin_y1) * blend;
        drivers.sales_to_capital[i] = sales_to_capital;
        drivers.cost_of_capital[i] = cost_of_capital;
    }
    return drivers;
}

SensitivityTable sensitivity_grid(const ValuationInputs& inputs, const SensitivityAxis& row_axis,
                                  const SensitivityAxis& col_axis) {
    for (const auto* axis : {&row_axis, &col_axis}) {
        if (!is_bare_driver_array(axis->driver) && !is_driver_path(axis->driver))
            raise(ErrorCode::UnknownDriver, "sensitivity axis \"" + axis->driver + "\" does not name a value driver");
        if (axis->values.empty() || axis->values.size() > 9)
            raise(ErrorCode::InvariantViolation,
                  "sensitivity axis \"" + axis->driver + "\" must carry 1..9 values");
    }

    SensitivityTable table;
    table.row_axis = row_axis;
    table.col_axis = col_axis;
    table.cells.resize(row_axis.values.size());
    for (std::size_t r = 0; r < row_axis.values.size(); ++r) {
        table.cells[r].resize(col_axis.values.size());
        for (std::size_t c = 0; c < col_axis.values.size(); ++c) {
            ValuationInputs scenario = inputs;
            apply_axis_override(scenario, row_axis.driver, row_axis.values[r]);
            apply_axis_override(scenario, col_axis.driver, col_axis.values[c]);
            table.cells[r][c] = value(scenario).value_per_share;
        }
    }
    return table;
}

double terminal_ev_to_ebitda(const ValuationResult& result, const ValuationInputs& inputs) {
    if (result.terminal_value == 0.0) return 0.0;
    const double year10_revenue = result.table.rows[kHorizonYears - 1].revenue;
    const double terminal_ebit =
        year10_revenue * (1.0 + inputs.drivers.terminal_growth) * inputs.drivers.terminal_margin;
    const double terminal_ebitda = terminal_ebit + inputs.financials.depreciation_amortization;
    if (terminal_ebitda <= 0.0)
        raise(ErrorCode::DegenerateInput, "terminal EBITDA must be positive, got " + std::to_string(terminal_ebitda));
    return result.terminal_value / terminal_ebitda;
}

} // namespace dbot::valuation
