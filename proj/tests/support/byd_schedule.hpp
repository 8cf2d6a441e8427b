#pragma once

// Shared driver schedule for the BYD-style scenario: 10% growth in year 1,
// 7% in years 2-10, 4.4% thereafter; 5% margin in year 1, 6.7% in years 2-10,
// 7% thereafter; sales-to-capital 1.2 in years 1-5 and 1.6 in years 6-10.

#include "dbot/valuation/types.hpp"

namespace testfix {

inline dbot::valuation::ValuationInputs byd_schedule_inputs() {
    using namespace dbot::valuation;
    ValuationInputs in;
    in.identity = {"BYD Company Limited", "BYD", "CNY", "CN"};
    in.macro = {0.044, 0.05, 0.25};

    in.financials.base_revenue = 602400.0;
    in.financials.base_ebit = 35542.0;
    in.financials.effective_tax_rate = 0.15;
    in.financials.depreciation_amortization = 18000.0;
    in.financials.total_debt = 120000.0;
    in.financials.cash_and_nonoperating = 90000.0;
    in.financials.shares_outstanding = 650.0;
    in.financials.market_price = 310.0;

    auto& d = in.drivers;
    d.revenue_growth[0] = 0.10;
    for (int t = 1; t < kHorizonYears; ++t) d.revenue_growth[static_cast<std::size_t>(t)] = 0.07;
    d.terminal_growth = 0.044;
    d.operating_margin[0] = 0.05;
    for (int t = 1; t < kHorizonYears; ++t) d.operating_margin[static_cast<std::size_t>(t)] = 0.067;
    d.terminal_margin = 0.07;
    for (int t = 0; t < 5; ++t) d.sales_to_capital[static_cast<std::size_t>(t)] = 1.2;
    for (int t = 5; t < kHorizonYears; ++t) d.sales_to_capital[static_cast<std::size_t>(t)] = 1.6;
    for (int t = 0; t < kHorizonYears; ++t) d.cost_of_capital[static_cast<std::size_t>(t)] = 0.085;
    d.terminal_cost_of_capital = 0.085;
    return in;
}

} // namespace testfix
