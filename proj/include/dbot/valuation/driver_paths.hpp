#pragma once

#include <string>
#include <vector>

#include "dbot/valuation/types.hpp"

namespace dbot::valuation {

// Scalar addressing into the mutable parts of ValuationInputs. Year-indexed
// paths are 1-based ("revenue_growth[1]" is forecast year 1):
//   revenue_growth[1..10], operating_margin[1..10], sales_to_capital[1..10],
//   cost_of_capital[1..10], terminal_growth, terminal_margin,
//   terminal_cost_of_capital, and the BaseFinancials field names.
// Bare array names ("operating_margin") are not scalar paths; sensitivity
// axes use them for uniform all-year overrides.

bool is_driver_path(const std::string& path);    // scalar path into ValueDrivers
bool is_financial_path(const std::string& path); // scalar path into BaseFinancials
bool is_bare_driver_array(const std::string& name);

// Throw UnknownDriver when the path names nothing.
double get_value_at(const ValuationInputs& inputs, const std::string& path);
void set_value_at(ValuationInputs& inputs, const std::string& path, double value);

} // namespace dbot::valuation
