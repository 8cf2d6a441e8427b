#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <random>

#include "dbot/error.hpp"
#include "dbot/fundamentals/providers.hpp"
#include "dbot/valuation/engine.hpp"

#include "support/temp_dir.hpp"

using namespace dbot;
using namespace dbot::fundamentals;

namespace {

nlohmann::json byd_like_doc(const std::string& as_of = "2024-11-04") {
    return nlohmann::json{
        {"identity",
         {{"name", "Testable Motors"}, {"ticker", "TSTM"}, {"listing_currency", "USD"}, {"country", "US"}}},
        {"as_of", as_of},
        {"revenue_history", {460000.0, 530000.0, 602400.0}},
        {"ebit", 35542.0},
        {"depreciation_amortization", 18000.0},
        {"effective_tax_rate", 0.15},
        {"total_debt", 120000.0},
        {"cash_and_nonoperating", 90000.0},
        {"invested_capital", 401600.0},
        {"shares_outstanding", 650.0},
        {"market_price", 310.0}};
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a dbot::Error");
    return ErrorCode::NotFound;
}

} // namespace

TEST_CASE("load_fundamentals: fixture round-trips bit-exactly") {
    testfix::TempDir dir;
    dir.write("TSTM/2024-11-04.json", byd_like_doc().dump());
    auto clock = util::RunClock::at("2024-11-04");

    auto snapshot = load_fundamentals("TSTM", "fixture:" + dir.str(), "2024-11-04", clock);
    CHECK(snapshot.identity.ticker == "TSTM");
    CHECK(snapshot.revenue_history == std::vector<double>{460000.0, 530000.0, 602400.0});

    // serialize -> parse is the identity on every numeric field
    nlohmann::json round = snapshot;
    auto back = round.get<FundamentalsSnapshot>();
    CHECK(nlohmann::json(back).dump() == round.dump());
    CHECK(back.revenue_history == snapshot.revenue_history);

    SUBCASE("empty as_of resolves to the latest fixture at the clock") {
        dir.write("TSTM/2024-10-01.json", byd_like_doc("2024-10-01").dump());
        auto latest = load_fundamentals("TSTM", "fixture:" + dir.str(), "", clock);
        CHECK(latest.as_of == "2024-11-04");
        auto earlier = load_fundamentals("TSTM", "fixture:" + dir.str(), "", util::RunClock::at("2024-10-15"));
        CHECK(earlier.as_of == "2024-10-01");
    }
}

TEST_CASE("load_fundamentals: error taxonomy") {
    testfix::TempDir dir;
    auto clock = util::RunClock::at("2024-11-04");

    SUBCASE("unknown ticker is NotFound") {
        CHECK(code_of([&] { load_fundamentals("NOPE", "fixture:" + dir.str(), "", clock); }) == ErrorCode::NotFound);
    }
    SUBCASE("missing required field is SchemaViolation naming the field") {
        auto doc = byd_like_doc();
        doc.erase("shares_outstanding");
        dir.write("TSTM/2024-11-04.json", doc.dump());
        try {
            load_fundamentals("TSTM", "fixture:" + dir.str(), "2024-11-04", clock);
            FAIL("expected SchemaViolation");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::SchemaViolation);
            CHECK(std::string(e.what()).find("shares_outstanding") != std::string::npos);
        }
    }
    SUBCASE("malformed json is SchemaViolation") {
        dir.write("TSTM/2024-11-04.json", "{ not json");
        CHECK(code_of([&] { load_fundamentals("TSTM", "fixture:" + dir.str(), "2024-11-04", clock); }) ==
              ErrorCode::SchemaViolation);
    }
    SUBCASE("as_of in the future of the run clock is rejected") {
        dir.write("TSTM/2024-11-04.json", byd_like_doc().dump());
        CHECK(code_of([&] {
                  load_fundamentals("TSTM", "fixture:" + dir.str(), "2024-11-04", util::RunClock::at("2024-10-01"));
              }) == ErrorCode::SchemaViolation);
    }
    SUBCASE("unregistered provider scheme is ConfigError") {
        CHECK(code_of([&] { load_fundamentals("TSTM", "bloomberg:key", "", clock); }) == ErrorCode::ConfigError);
    }
}

TEST_CASE("validate_snapshot: every failed invariant is listed") {
    auto doc = byd_like_doc();
    doc["revenue_history"] = {1000.0};
    doc["invested_capital"] = 0.0;
    doc["market_price"] = -3.0;
    auto snapshot = doc.get<FundamentalsSnapshot>();
    try {
        validate_snapshot(snapshot, "2024-11-04");
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        const std::string what = e.what();
        CHECK(what.find("revenue_history") != std::string::npos);
        CHECK(what.find("invested_capital") != std::string::npos);
        CHECK(what.find("market_price") != std::string::npos);
    }
}

TEST_CASE("validated snapshots always derive anchors cleanly") {
    // acceptance by validate_snapshot implies acceptance by
    // derive_base_anchors: the only remaining failure mode is history < 2,
    // which validation already rejects.
    std::mt19937 rng(8080);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
    valuation::MacroInputs macro{0.045, 0.05, 0.25};
    for (int k = 0; k < 100; ++k) {
        FundamentalsSnapshot snap;
        snap.identity = {"Random Co", "RND", "USD", "US"};
        snap.as_of = "2024-11-04";
        const int n = 2 + static_cast<int>(uniform(0.0, 6.99));
        for (int i = 0; i < n; ++i) snap.revenue_history.push_back(uniform(1.0, 90000.0));
        snap.ebit = uniform(-5000.0, 9000.0);
        snap.effective_tax_rate = uniform(0.0, 0.45);
        snap.total_debt = uniform(0.0, 10000.0);
        snap.cash_and_nonoperating = uniform(0.0, 10000.0);
        snap.invested_capital = uniform(1.0, 50000.0);
        snap.shares_outstanding = uniform(0.1, 1000.0);
        snap.market_price = uniform(0.1, 900.0);
        if (!check_snapshot(snap, "2024-11-04").empty()) continue;
        auto drivers = valuation::derive_base_anchors(snap, macro);
        CHECK(valuation::check_drivers(drivers, macro).empty());
    }
}

TEST_CASE("fetch_consensus: passthrough, absence, and invariants") {
    testfix::TempDir dir;
    auto clock = util::RunClock::at("2024-11-04");
    dir.write("TSTM/2024-11-04.json", byd_like_doc().dump());

    SUBCASE("values pass through") {
        dir.write("TSTM/2024-11-04.consensus.json",
                  nlohmann::json{{"as_of", "2024-11-04"},
                                 {"revenue_growth_y1", 0.12},
                                 {"revenue_growth_y2", 0.08},
                                 {"operating_margin_fwd", 0.062},
                                 {"analyst_count", 24}}
                      .dump());
        auto consensus = fetch_consensus("TSTM", "fixture:" + dir.str(), "2024-11-04", clock);
        CHECK(consensus.revenue_growth_y1 == 0.12);
        CHECK(consensus.analyst_count == 24);
        CHECK_FALSE(consensus.median_target_price.has_value());
    }
    SUBCASE("missing document is NotFound") {
        CHECK(code_of([&] { fetch_consensus("TSTM", "fixture:" + dir.str(), "2024-11-04", clock); }) ==
              ErrorCode::NotFound);
    }
    SUBCASE("empty document is NotFound") {
        dir.write("TSTM/2024-11-04.consensus.json", "{}");
        CHECK(code_of([&] { fetch_consensus("TSTM", "fixture:" + dir.str(), "2024-11-04", clock); }) ==
              ErrorCode::NotFound);
    }
    SUBCASE("estimates with zero analysts violate the schema") {
        dir.write("TSTM/2024-11-04.consensus.json",
                  nlohmann::json{{"as_of", "2024-11-04"}, {"revenue_growth_y1", 0.12}, {"analyst_count", 0}}.dump());
        CHECK(code_of([&] { fetch_consensus("TSTM", "fixture:" + dir.str(), "2024-11-04", clock); }) ==
              ErrorCode::SchemaViolation);
    }
}

TEST_CASE("fetch_comparables: peer sets") {
    testfix::TempDir dir;
    auto clock = util::RunClock::at("2024-11-04");
    dir.write("TSTM/2024-11-04.json", byd_like_doc().dump());

    auto peer = [](const std::string& ticker, double ratio) {
        return nlohmann::json{{"identity",
                               {{"name", ticker + " Co"}, {"ticker", ticker}, {"listing_currency", "USD"},
                                {"country", "US"}}},
                              {"ev_to_ebitda", ratio}};
    };

    SUBCASE("four peers load; an 8.8 multiple would undercut all of them") {
        dir.write("TSTM/2024-11-04.comparables.json",
                  nlohmann::json{{"peers", {peer("TSLA", 17.5), peer("NIO", 10.2), peer("XPEV", 11.0),
                                            peer("LI", 9.4)}}}
                      .dump());
        auto comps = fetch_comparables("TSTM", "fixture:" + dir.str(), "2024-11-04", clock);
        REQUIRE(comps.peers.size() == 4);
        for (const auto& p : comps.peers) CHECK(p.ev_to_ebitda > 8.8);
    }
    SUBCASE("duplicate peer tickers violate the schema") {
        dir.write("TSTM/2024-11-04.comparables.json",
                  nlohmann::json{{"peers", {peer("TSLA", 17.5), peer("TSLA", 9.0)}}}.dump());
        CHECK(code_of([&] { fetch_comparables("TSTM", "fixture:" + dir.str(), "2024-11-04", clock); }) ==
              ErrorCode::SchemaViolation);
    }
    SUBCASE("a single peer is a valid set") {
        dir.write("TSTM/2024-11-04.comparables.json", nlohmann::json{{"peers", {peer("TSLA", 17.5)}}}.dump());
        CHECK(fetch_comparables("TSTM", "fixture:" + dir.str(), "2024-11-04", clock).peers.size() == 1);
    }
    SUBCASE("empty peer list violates the schema") {
        dir.write("TSTM/2024-11-04.comparables.json", R"({"peers": []})");
        CHECK(code_of([&] { fetch_comparables("TSTM", "fixture:" + dir.str(), "2024-11-04", clock); }) ==
              ErrorCode::SchemaViolation);
    }
}

TEST_CASE("consensus and comparables round-trip through json") {
    ConsensusEstimates consensus;
    consensus.as_of = "2024-11-04";
    consensus.revenue_growth_y1 = 0.12;
    consensus.revenue_growth_y2 = 0.08;
    consensus.operating_margin_fwd = 0.062;
    consensus.analyst_count = 24;
    consensus.median_target_price = 365.0;
    auto c2 = nlohmann::json(consensus).get<ConsensusEstimates>();
    CHECK(c2.median_target_price == consensus.median_target_price);
    CHECK(nlohmann::json(c2).dump() == nlohmann::json(consensus).dump());

    ComparablesSet comps;
    comps.peers.push_back({{"Tesla Inc", "TSLA", "USD", "US"}, 17.5, 0.15, 0.09});
    auto k2 = nlohmann::json(comps).get<ComparablesSet>();
    CHECK(nlohmann::json(k2).dump() == nlohmann::json(comps).dump());
}
