#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <future>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbot/error.hpp"
#include "dbot/valuation/driver_paths.hpp"
#include "dbot/valuation/engine.hpp"

#include "support/byd_schedule.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace dbot;
using namespace dbot::valuation;

namespace {

ValuationInputs flat_inputs(double base_revenue, double margin, double tax, double growth, double wacc,
                            double terminal_growth, double debt, double cash, double shares) {
    ValuationInputs in;
    in.identity = testgen::test_identity("FLATCO");
    in.macro = {std::max(terminal_growth, 0.03), 0.05, tax};
    in.financials.base_revenue = base_revenue;
    in.financials.base_ebit = base_revenue * margin;
    in.financials.effective_tax_rate = tax;
    in.financials.total_debt = debt;
    in.financials.cash_and_nonoperating = cash;
    in.financials.shares_outstanding = shares;
    in.financials.market_price = 100.0;
    for (int t = 0; t < kHorizonYears; ++t) {
        const auto i = static_cast<std::size_t>(t);
        in.drivers.revenue_growth[i] = growth;
        in.drivers.operating_margin[i] = margin;
        in.drivers.sales_to_capital[i] = 2.0;
        in.drivers.cost_of_capital[i] = wacc;
    }
    in.drivers.terminal_growth = terminal_growth;
    in.drivers.terminal_margin = margin;
    in.drivers.terminal_cost_of_capital = wacc;
    return in;
}

double round_cents(double v) { return std::round(v * 100.0) / 100.0; }

} // namespace

TEST_CASE("value: zero-growth perpetuity earns fcff 75 and 7.50 per share") {
    auto in = flat_inputs(1000.0, 0.10, 0.25, 0.0, 0.10, 0.0, 0.0, 0.0, 100.0);
    auto v = value(in);
    for (const auto& row : v.table.rows) {
        CHECK(row.fcff == doctest::Approx(75.0).epsilon(1e-12));
        CHECK(row.reinvestment == 0.0);
    }
    CHECK(v.enterprise_value == doctest::Approx(750.0).epsilon(1e-9));
    CHECK(v.value_per_share == doctest::Approx(7.50).epsilon(1e-9));
    CHECK(round_cents(v.value_per_share) == 7.50);
}

TEST_CASE("value: pre-revenue shell is cash minus debt") {
    auto in = flat_inputs(0.0, 0.10, 0.25, 0.0, 0.10, 0.0, 50.0, 200.0, 10.0);
    auto v = value(in);
    CHECK(v.enterprise_value == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(v.equity_value == doctest::Approx(150.0).epsilon(1e-12));
    CHECK(v.value_per_share == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("value: BYD-style schedule matches the hand oracle") {
    auto in = testfix::byd_schedule_inputs();
    auto v = value(in);
    auto hand = oracle::value_by_hand(in);
    CHECK(oracle::rel_err(v.value_per_share, hand.value_per_share) < 1e-9);
    CHECK(oracle::rel_err(v.enterprise_value, hand.enterprise_value) < 1e-9);
    CHECK(oracle::rel_err(v.terminal_value, hand.terminal_value) < 1e-9);
    for (int t = 0; t < kHorizonYears; ++t) {
        const auto i = static_cast<std::size_t>(t);
        CHECK(oracle::rel_err(v.table.rows[i].fcff, hand.fcff[i]) < 1e-9);
    }
}

TEST_CASE("value: degenerate and invariant errors carry the right codes") {
    auto in = flat_inputs(1000.0, 0.10, 0.25, 0.0, 0.10, 0.0, 0.0, 0.0, 100.0);

    SUBCASE("zero shares") {
        in.financials.shares_outstanding = 0.0;
        CHECK_THROWS_WITH_AS(value(in), doctest::Contains("shares_outstanding"), Error);
        try {
            value(in);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DegenerateInput);
        }
    }
    SUBCASE("gordon denominator") {
        in.drivers.terminal_cost_of_capital = 0.0;
        in.drivers.terminal_growth = 0.0;
        try {
            value(in);
            FAIL("expected InvariantViolation");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvariantViolation);
        }
    }
    SUBCASE("terminal growth above the risk-free rate is rejected") {
        in.macro.risk_free_rate = 0.044;
        in.drivers.terminal_growth = 0.10;
        in.drivers.terminal_cost_of_capital = 0.12;
        try {
            value(in);
            FAIL("expected InvariantViolation");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvariantViolation);
            CHECK(std::string(e.what()).find("risk-free") != std::string::npos);
        }
    }
}

TEST_CASE("value: purity - equal inputs give bit-identical results, across threads too") {
    auto in = testfix::byd_schedule_inputs();
    auto first = value(in);
    auto second = value(in);
    CHECK(std::memcmp(&first.value_per_share, &second.value_per_share, sizeof(double)) == 0);
    CHECK(first.enterprise_value == second.enterprise_value);

    std::vector<std::future<double>> futures;
    for (int i = 0; i < 8; ++i)
        futures.push_back(std::async(std::launch::async, [&in] { return value(in).value_per_share; }));
    for (auto& f : futures) CHECK(f.get() == first.value_per_share);
}

TEST_CASE("value: gordon identity for zero growth and flat wacc") {
    std::mt19937 rng(20241104);
    std::uniform_real_distribution<double> margin_dist(0.05, 0.30);
    std::uniform_real_distribution<double> wacc_dist(0.06, 0.14);
    std::uniform_real_distribution<double> tax_dist(0.0, 0.35);
    for (int k = 0; k < 25; ++k) {
        double margin = margin_dist(rng);
        double wacc = wacc_dist(rng);
        double tax = tax_dist(rng);
        auto in = flat_inputs(1000.0, margin, tax, 0.0, wacc, 0.0, 0.0, 0.0, 10.0);
        auto v = value(in);
        double nopat = 1000.0 * margin * (1.0 - tax);
        CHECK(oracle::rel_err(v.enterprise_value, nopat / wacc) < 1e-9);
        for (const auto& row : v.table.rows) CHECK(row.reinvestment == 0.0);
    }
}

TEST_CASE("value: additivity - enterprise value is the pv column plus pv terminal") {
    std::mt19937 rng(7);
    for (int k = 0; k < 50; ++k) {
        auto in = testgen::random_inputs(rng);
        auto v = value(in);
        double column_sum = 0.0;
        for (const auto& row : v.table.rows) column_sum += row.present_value;
        CHECK(oracle::rel_err(v.enterprise_value, column_sum + v.pv_terminal) < 1e-9);
        CHECK(oracle::rel_err(v.equity_value,
                              v.enterprise_value - in.financials.total_debt + in.financials.cash_and_nonoperating) <
              1e-9);
    }
}

TEST_CASE("value: oracle equivalence over randomized inputs") {
    std::mt19937 rng(31337);
    for (int k = 0; k < 100; ++k) {
        auto in = testgen::random_inputs(rng);
        auto v = value(in);
        auto hand = oracle::value_by_hand(in);
        CHECK(oracle::rel_err(v.value_per_share, hand.value_per_share) < 1e-9);
    }
}

TEST_CASE("value: monotonicity in margin, wacc, and sales-to-capital") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> year_dist(0, kHorizonYears - 1);
    const double slack = 1e-9;
    for (int k = 0; k < 50; ++k) {
        auto in = testgen::random_profitable_inputs(rng);
        auto base = value(in).value_per_share;
        auto tolerance = [&](double v) { return slack * std::max(1.0, std::fabs(v)); };
        const auto year = static_cast<std::size_t>(year_dist(rng));

        auto up_margin = in;
        up_margin.drivers.operating_margin[year] = std::min(0.95, in.drivers.operating_margin[year] + 0.02);
        CHECK(value(up_margin).value_per_share >= base - tolerance(base));

        auto up_terminal_margin = in;
        up_terminal_margin.drivers.terminal_margin = std::min(0.95, in.drivers.terminal_margin + 0.02);
        CHECK(value(up_terminal_margin).value_per_share >= base - tolerance(base));

        auto up_wacc = in;
        up_wacc.drivers.cost_of_capital[year] += 0.02;
        CHECK(value(up_wacc).value_per_share <= base + tolerance(base));

        auto up_terminal_wacc = in;
        up_terminal_wacc.drivers.terminal_cost_of_capital += 0.02;
        CHECK(value(up_terminal_wacc).value_per_share <= base + tolerance(base));

        auto up_s2c = in;
        up_s2c.drivers.sales_to_capital[year] += 0.5;
        CHECK(value(up_s2c).value_per_share >= base - tolerance(base));
    }
}

TEST_CASE("derive_base_anchors: direct ratios") {
    fundamentals::FundamentalsSnapshot snap;
    snap.identity = testgen::test_identity("ANCHOR");
    snap.as_of = "2024-11-04";
    snap.revenue_history = {800.0, 1000.0};
    snap.ebit = 100.0;
    snap.invested_capital = 500.0;
    snap.effective_tax_rate = 0.2;
    snap.shares_outstanding = 10.0;
    snap.market_price = 50.0;
    MacroInputs macro{0.04, 0.05, 0.25};

    auto d = derive_base_anchors(snap, macro);
    CHECK(d.revenue_growth[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(d.operating_margin[0] == doctest::Approx(0.10).epsilon(1e-12));
    CHECK(d.sales_to_capital[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(d.cost_of_capital[0] == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(d.terminal_growth == doctest::Approx(0.04).epsilon(1e-12));
    // year-10 entries land on the terminal anchors
    CHECK(d.revenue_growth[9] == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(d.operating_margin[9] == doctest::Approx(0.10).epsilon(1e-12));

    SUBCASE("flat history gives zero year-1 growth") {
        snap.revenue_history = {1000.0, 1000.0};
        auto flat = derive_base_anchors(snap, macro);
        CHECK(flat.revenue_growth[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    }
    SUBCASE("three-year history uses the trailing CAGR") {
        snap.revenue_history = {600.0, 800.0, 1000.0};
        auto d3 = derive_base_anchors(snap, macro);
        CHECK(d3.revenue_growth[0] == doctest::Approx(0.2909944487358056).epsilon(1e-12));
    }
    SUBCASE("one observation is insufficient") {
        snap.revenue_history = {1000.0};
        try {
            derive_base_anchors(snap, macro);
            FAIL("expected InsufficientHistory");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InsufficientHistory);
        }
    }
}

TEST_CASE("derive_base_anchors: randomized snapshots match one-line ratio oracles") {
    std::mt19937 rng(424242);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
    for (int k = 0; k < 50; ++k) {
        fundamentals::FundamentalsSnapshot snap;
        snap.identity = testgen::test_identity("RATIO");
        snap.as_of = "2024-11-04";
        const int n = 2 + static_cast<int>(uniform(0.0, 6.0));
        for (int i = 0; i < n; ++i) snap.revenue_history.push_back(uniform(100.0, 50000.0));
        snap.ebit = uniform(-3000.0, 8000.0);
        snap.invested_capital = uniform(500.0, 40000.0);
        snap.effective_tax_rate = uniform(0.0, 0.4);
        snap.shares_outstanding = uniform(1.0, 100.0);
        snap.market_price = uniform(1.0, 100.0);
        MacroInputs macro{uniform(0.01, 0.05), uniform(0.03, 0.06), 0.25};

        auto d = derive_base_anchors(snap, macro);
        const double want_cagr = std::clamp(
            std::pow(snap.revenue_history.back() / snap.revenue_history.front(), 1.0 / (n - 1)) - 1.0, -0.5, 1.0);
        const double want_margin = std::clamp(snap.ebit / snap.revenue_history.back(), -0.99, 0.99);
        const double want_s2c = snap.revenue_history.back() / snap.invested_capital;
        CHECK(d.revenue_growth[0] == doctest::Approx(want_cagr).epsilon(1e-12));
        CHECK(d.operating_margin[0] == doctest::Approx(want_margin).epsilon(1e-12));
        CHECK(d.sales_to_capital[0] == doctest::Approx(want_s2c).epsilon(1e-12));
        CHECK(d.cost_of_capital[0] ==
              doctest::Approx(macro.risk_free_rate + macro.equity_risk_premium).epsilon(1e-12));

        // derived anchors always assemble into valid inputs
        ValuationInputs in;
        in.identity = snap.identity;
        in.macro = macro;
        in.financials.base_revenue = snap.revenue_history.back();
        in.financials.base_ebit = snap.ebit;
        in.financials.effective_tax_rate = snap.effective_tax_rate;
        in.financials.shares_outstanding = snap.shares_outstanding;
        in.financials.market_price = snap.market_price;
        in.drivers = d;
        CHECK(check_inputs(in).empty());
    }
}

TEST_CASE("sensitivity_grid: identity, monotone 3x3, and unknown drivers") {
    auto in = testfix::byd_schedule_inputs();
    auto point = value(in).value_per_share;

    SUBCASE("1x1 grid at the unperturbed point") {
        SensitivityAxis row{"terminal_margin", {in.drivers.terminal_margin}};
        SensitivityAxis col{"terminal_cost_of_capital", {in.drivers.terminal_cost_of_capital}};
        auto table = sensitivity_grid(in, row, col);
        REQUIRE(table.cells.size() == 1);
        REQUIRE(table.cells[0].size() == 1);
        CHECK(table.cells[0][0] == point);
    }

    SUBCASE("3x3 margin x wacc grid is monotone the right way") {
        SensitivityAxis row{"operating_margin", {0.05, 0.06, 0.07}};
        SensitivityAxis col{"cost_of_capital", {0.08, 0.09, 0.10}};
        auto table = sensitivity_grid(in, row, col);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(table.cells[0][c] <= table.cells[1][c]);
            CHECK(table.cells[1][c] <= table.cells[2][c]);
        }
        for (std::size_t r = 0; r < 3; ++r) {
            CHECK(table.cells[r][0] >= table.cells[r][1]);
            CHECK(table.cells[r][1] >= table.cells[r][2]);
        }
        // every cell re-evaluates value() on the perturbed copy
        ValuationInputs scenario = in;
        for (int year = 1; year <= kHorizonYears; ++year) {
            set_value_at(scenario, "operating_margin[" + std::to_string(year) + "]", 0.06);
            set_value_at(scenario, "cost_of_capital[" + std::to_string(year) + "]", 0.09);
        }
        CHECK(table.cells[1][1] == value(scenario).value_per_share);
    }

    SUBCASE("BYD grid brackets the point estimate") {
        SensitivityAxis row{"terminal_margin", {0.06, 0.07, 0.08}};
        SensitivityAxis col{"cost_of_capital", {0.075, 0.085, 0.095}};
        auto table = sensitivity_grid(in, row, col);
        double lo = table.cells[0][0], hi = table.cells[0][0];
        for (const auto& r : table.cells)
            for (double cell : r) {
                lo = std::min(lo, cell);
                hi = std::max(hi, cell);
            }
        CHECK(lo <= point);
        CHECK(point <= hi);
        CHECK(lo < hi);
    }

    SUBCASE("unknown driver raises UnknownDriver") {
        SensitivityAxis row{"vibes", {1.0}};
        SensitivityAxis col{"terminal_margin", {0.07}};
        try {
            sensitivity_grid(in, row, col);
            FAIL("expected UnknownDriver");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::UnknownDriver);
        }
    }

    SUBCASE("inputs are unmodified") {
        auto before = nlohmann::json(in).dump();
        SensitivityAxis row{"terminal_margin", {0.06, 0.08}};
        SensitivityAxis col{"terminal_cost_of_capital", {0.08, 0.09}};
        sensitivity_grid(in, row, col);
        CHECK(nlohmann::json(in).dump() == before);
    }
}

TEST_CASE("terminal_ev_to_ebitda: ratio arithmetic and edge cases") {
    auto in = testfix::byd_schedule_inputs();

    SUBCASE("880 over 100 is 8.8") {
        ValuationInputs shaped = in;
        shaped.financials.depreciation_amortization = 0.0;
        shaped.drivers.terminal_growth = 0.0;
        shaped.drivers.terminal_margin = 0.10;
        ValuationResult result;
        result.terminal_value = 880.0;
        result.table.rows[kHorizonYears - 1].revenue = 1000.0;
        CHECK(terminal_ev_to_ebitda(result, shaped) == doctest::Approx(8.8).epsilon(1e-12));
    }

    SUBCASE("zero terminal value maps to zero") {
        ValuationResult result;
        result.terminal_value = 0.0;
        CHECK(terminal_ev_to_ebitda(result, in) == 0.0);
    }

    SUBCASE("non-positive terminal ebitda is degenerate") {
        ValuationInputs shaped = in;
        shaped.financials.depreciation_amortization = 0.0;
        shaped.drivers.terminal_margin = -0.05;
        ValuationResult result;
        result.terminal_value = 100.0;
        result.table.rows[kHorizonYears - 1].revenue = 1000.0;
        try {
            terminal_ev_to_ebitda(result, shaped);
            FAIL("expected DegenerateInput");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DegenerateInput);
        }
    }

    SUBCASE("randomized results match the division oracle") {
        std::mt19937 rng(5150);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int k = 0; k < 25; ++k) {
            auto v = value(in);
            double revenue10 = v.table.rows[kHorizonYears - 1].revenue;
            double ebitda = revenue10 * (1.0 + in.drivers.terminal_growth) * in.drivers.terminal_margin +
                            in.financials.depreciation_amortization;
            CHECK(terminal_ev_to_ebitda(v, in) == doctest::Approx(v.terminal_value / ebitda).epsilon(1e-12));
            CHECK(v.terminal_ev_to_ebitda == doctest::Approx(v.terminal_value / ebitda).epsilon(1e-12));
            in.drivers.terminal_margin = 0.03 + 0.2 * u01(rng);
        }
    }
}

TEST_CASE("valuation types round-trip through json bit-exactly") {
    std::mt19937 rng(2024);
    for (int k = 0; k < 20; ++k) {
        auto in = testgen::random_inputs(rng);
        in.revision = static_cast<std::uint64_t>(k);
        in.provenance = {"patch-1-market"};
        nlohmann::json j = in;
        auto back = j.get<ValuationInputs>();
        CHECK(nlohmann::json(back).dump() == j.dump());
        CHECK(back.drivers.terminal_growth == in.drivers.terminal_growth);
        CHECK(back.financials.base_revenue == in.financials.base_revenue);

        auto v = value(in);
        nlohmann::json jr = v;
        auto vr = jr.get<ValuationResult>();
        CHECK(vr.value_per_share == v.value_per_share);
        CHECK(nlohmann::json(vr).dump() == jr.dump());
    }
}
