#pragma once

#include "dbot/valuation/types.hpp"

namespace dbot::valuation {

// Free-cash-flow-to-firm valuation over a 10-year explicit horizon plus a
// Gordon terminal value. Pure and deterministic: equal inputs give
// bit-identical results, safe to call concurrently.
//
// Conventions (fixed, mirrored by the test oracle):
//   - revenue anchors at base_revenue; year t revenue compounds year t growth
//   - taxes use the effective rate in years 1-5, then move linearly to the
//     marginal rate by year 10; the terminal year is taxed at the marginal
//     rate; negative EBIT pays no tax (no NOL carryforwards)
//   - reinvestment = revenue delta / sales-to-capital, floored at 0 when
//     revenue declines
//   - end-of-year discounting, cumulative across the year-by-year rate path
//   - terminal ROIC equals the terminal cost of capital (zero excess returns),
//     so the terminal reinvestment rate is terminal_growth / terminal ROIC
ValuationResult value(const ValuationInputs& inputs);

// Deterministic base-year anchors from a fundamentals snapshot: trailing CAGR
// for year-1 growth (clamped to [-50%, +100%]), EBIT/revenue for the base
// margin, revenue/invested-capital for sales-to-capital, and
// risk_free + equity_risk_premium for the cost of capital. Each 10-year array
// is filled by linear interpolation from its year-1 anchor to its terminal
// value. Forward-path proposals beyond these anchors are agent work.
ValueDrivers derive_base_anchors(const fundamentals::FundamentalsSnapshot& snapshot, const MacroInputs& macro);

// Re-values `inputs` at every (row, col) override pair. An axis driver is a
// scalar driver path ("terminal_margin", "operating_margin[3]") or a bare
// array name ("cost_of_capital"), which overrides all ten explicit years
// uniformly and leaves the terminal scalar untouched. Inputs are unmodified.
SensitivityTable sensitivity_grid(const ValuationInputs& inputs, const SensitivityAxis& row_axis,
                                  const SensitivityAxis& col_axis);

// Terminal enterprise value over terminal-year EBITDA (EBIT plus the
// depreciation proxy carried in the financials). Zero terminal value maps to
// 0; otherwise a non-positive terminal EBITDA is DegenerateInput.
double terminal_ev_to_ebitda(const ValuationResult& result, const ValuationInputs& inputs);

} // namespace dbot::valuation
