#include "dbot/valuation/driver_paths.hpp"

#include <array>
#include <cctype>
#include <optional>

#include "dbot/error.hpp"

namespace dbot::valuation {

namespace {

struct ParsedPath {
    std::string name;
    std::optional<int> year; // 1-based
};

std::optional<ParsedPath> parse_path(const std::string& path) {
    auto bracket = path.find('[');
    if (bracket == std::string::npos) return ParsedPath{path, std::nullopt};
    if (path.back() != ']' || bracket + 2 > path.size()) return std::nullopt;
    const std::string name = path.substr(0, bracket);
    const std::string index_text = path.substr(bracket + 1, path.size() - bracket - 2);
    if (index_text.empty()) return std::nullopt;
    int year = 0;
    for (char c : index_text) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        year = year * 10 + (c - '0');
        if (year > 1000) return std::nullopt;
    }
    return ParsedPath{name, year};
}

std::array<double, kHorizonYears>* driver_array(ValueDrivers& d, const std::string& name) {
    if (name == "revenue_growth") return &d.revenue_growth;
    if (name == "operating_margin") return &d.operating_margin;
    if (name == "sales_to_capital") return &d.sales_to_capital;
    if (name == "cost_of_capital") return &d.cost_of_capital;
    return nullptr;
}

double* driver_scalar(ValueDrivers& d, const std::string& name) {
    if (name == "terminal_growth") return &d.terminal_growth;
    if (name == "terminal_margin") return &d.terminal_margin;
    if (name == "terminal_cost_of_capital") return &d.terminal_cost_of_capital;
    return nullptr;
}

double* financial_scalar(BaseFinancials& f, const std::string& name) {
    if (name == "base_revenue") return &f.base_revenue;
    if (name == "base_ebit") return &f.base_ebit;
    if (name == "effective_tax_rate") return &f.effective_tax_rate;
    if (name == "depreciation_amortization") return &f.depreciation_amortization;
    if (name == "total_debt") return &f.total_debt;
    if (name == "cash_and_nonoperating") return &f.cash_and_nonoperating;
    if (name == "shares_outstanding") return &f.shares_outstanding;
    if (name == "market_price") return &f.market_price;
    return nullptr;
}

double* resolve(ValuationInputs& inputs, const std::string& path) {
    auto parsed = parse_path(path);
    if (!parsed) return nullptr;
    if (parsed->year) {
        auto* arr = driver_array(inputs.drivers, parsed->name);
        if (!arr) return nullptr;
        const int year = *parsed->year;
        if (year < 1 || year > kHorizonYears) return nullptr;
        return &(*arr)[static_cast<std::size_t>(year - 1)];
    }
    if (auto* scalar = driver_scalar(inputs.drivers, parsed->name)) return scalar;
    return financial_scalar(inputs.financials, parsed->name);
}

} // namespace

bool is_bare_driver_array(const std::string& name) {
    ValueDrivers probe;
    return driver_array(probe, name) != nullptr;
}

bool is_driver_path(const std::string& path) {
    auto parsed = parse_path(path);
    if (!parsed) return false;
    ValueDrivers probe;
    if (parsed->year)
        return driver_array(probe, parsed->name) != nullptr && *parsed->year >= 1 && *parsed->year <= kHorizonYears;
    return driver_scalar(probe, parsed->name) != nullptr;
}

bool is_financial_path(const std::string& path) {
    auto parsed = parse_path(path);
    if (!parsed || parsed->year) return false;
    BaseFinancials probe;
    return financial_scalar(probe, parsed->name) != nullptr;
}

double get_value_at(const ValuationInputs& inputs, const std::string& path) {
    auto copy = inputs; // resolve mutably against a copy; cheaper than a const overload twin
    double* slot = resolve(copy, path);
    if (!slot) raise(ErrorCode::UnknownDriver, "no driver or financial field at path \"" + path + "\"");
    return *slot;
}

void set_value_at(ValuationInputs& inputs, const std::string& path, double value) {
    double* slot = resolve(inputs, path);
    if (!slot) raise(ErrorCode::UnknownDriver, "no driver or financial field at path \"" + path + "\"");
    *slot = value;
}

} // namespace dbot::valuation
