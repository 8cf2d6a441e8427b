#include "dbot/orchestrator/full_run.hpp"
#include "dbot/orchestrator/run.hpp"

#include <atomic>
#include <cmath>

#include "dbot/error.hpp"
#include "dbot/reporting/report.hpp"
#include "dbot/util/hash.hpp"

namespace dbot::orch {

namespace {

TranscriptEntry entry_from_outcome(int round, const agents::AgentOutcome& outcome,
                                   const valuation::ValuationResult& v) {
    TranscriptEntry entry;
    entry.round = round;
    entry.route = outcome.route;
    entry.action = outcome.action;
    entry.note = outcome.note;
    entry.patch = outcome.patch;
    entry.tables = outcome.tables;
    entry.value = RoundValue::from(v);
    return entry;
}

TranscriptEntry skipped_entry(int round, const std::string& route, const std::string& note,
                              const valuation::ValuationResult& v) {
    TranscriptEntry entry;
    entry.round = round;
    entry.route = route;
    entry.action = "skipped";
    entry.note = note;
    entry.value = RoundValue::from(v);
    return entry;
}

agents::AgentContext agent_context(llm::Gateway& gateway, const RunConfig& config) {
    return agents::AgentContext{gateway,
                                agents::PatchGuardrails{config.patch_max_rel_change, config.patch_zero_prior_abs},
                                config.news_theta1, config.news_theta2};
}

// Dispatches one agent step; returns the transcript entry for the round.
TranscriptEntry run_step(const std::string& route, int round, RunState& state, RunServices& services) {
    auto ctx = agent_context(services.gateway, services.config);
    const std::string patch_id = "patch-" + std::to_string(round) + "-" + route;
    const valuation::ValuationResult& current = state.value_history.back();

    if (route == "market") {
        auto outcome = agents::run_market_agent(state.inputs, current, ctx, patch_id);
        return entry_from_outcome(round, outcome, valuation::value(state.inputs));
    }
    if (route == "sensitivity") {
        auto result = agents::run_sensitivity_agent(state.inputs, ctx, patch_id);
        return entry_from_outcome(round, result.outcome, valuation::value(state.inputs));
    }
    if (route == "consensus") {
        fundamentals::ConsensusEstimates consensus;
        try {
            consensus = fundamentals::fetch_consensus(services.ticker, services.config.fixtures_source,
                                                      services.as_of, services.clock);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotFound) throw;
            return skipped_entry(round, route, "consensus unavailable: " + e.detail(), current);
        }
        auto outcome = agents::run_consensus_agent(state.inputs, consensus, ctx, patch_id);
        return entry_from_outcome(round, outcome, valuation::value(state.inputs));
    }
    if (route == "comparables") {
        fundamentals::ComparablesSet comparables;
        try {
            comparables = fundamentals::fetch_comparables(services.ticker, services.config.fixtures_source,
                                                          services.as_of, services.clock);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotFound) throw;
            return skipped_entry(round, route, "comparables unavailable: " + e.detail(), current);
        }
        auto outcome = agents::run_comparables_agent(state.inputs, current, comparables, ctx, patch_id);
        return entry_from_outcome(round, outcome, valuation::value(state.inputs));
    }
    if (route == "news") {
        auto [items, warnings] =
            agents::fetch_news(services.ticker, services.config.fixtures_source, services.as_of, services.clock);
        std::string warning_note;
        for (const auto& w : warnings) {
            if (!warning_note.empty()) warning_note += "; ";
            warning_note += w;
        }
        if (items.empty())
            return skipped_entry(round, route,
                                 warning_note.empty() ? "no news items" : "no news items (" + warning_note + ")",
                                 current);
        auto digest = agents::triage_news(items, ctx);
        auto outcome = agents::apply_news(state.inputs, digest, ctx, patch_id);
        if (!warning_note.empty())
            outcome.note = outcome.note.empty() ? warning_note : outcome.note + "; " + warning_note;
        return entry_from_outcome(round, outcome, valuation::value(state.inputs));
    }
    raise(ErrorCode::InvariantViolation, "unknown route \"" + route + "\" reached dispatch");
}

} // namespace

RoundValue RoundValue::from(const valuation::ValuationResult& v) {
    return RoundValue{v.value_per_share, v.enterprise_value, v.equity_value,
                      v.pv_explicit,     v.pv_terminal,      v.terminal_value};
}

valuation::ValuationInputs initialize_inputs(const fundamentals::FundamentalsSnapshot& snapshot,
                                             const valuation::MacroInputs& macro) {
    valuation::ValuationInputs inputs;
    inputs.identity = snapshot.identity;
    inputs.macro = macro;
    inputs.financials.base_revenue = snapshot.revenue_history.back();
    inputs.financials.base_ebit = snapshot.ebit;
    inputs.financials.effective_tax_rate = snapshot.effective_tax_rate;
    inputs.financials.depreciation_amortization = snapshot.depreciation_amortization;
    inputs.financials.total_debt = snapshot.total_debt;
    inputs.financials.cash_and_nonoperating = snapshot.cash_and_nonoperating;
    inputs.financials.shares_outstanding = snapshot.shares_outstanding;
    inputs.financials.market_price = snapshot.market_price;
    inputs.drivers = valuation::derive_base_anchors(snapshot, macro);
    inputs.revision = 0;
    valuation::require_valid(inputs);
    return inputs;
}

RunState make_initial_state(const fundamentals::FundamentalsSnapshot& snapshot,
                            const valuation::MacroInputs& macro) {
    RunState state;
    state.inputs = initialize_inputs(snapshot, macro);
    auto v = valuation::value(state.inputs);
    state.value_history.push_back(v);
    TranscriptEntry entry;
    entry.round = 0;
    entry.route = "initialize";
    entry.action = "initialized";
    entry.note = "anchors derived from " + snapshot.as_of + " fundamentals";
    entry.tables["fundamentals"] = snapshot;
    entry.value = RoundValue::from(v);
    state.transcript.push_back(std::move(entry));
    return state;
}

void run_waterfall(RunState& state, RunServices& services) {
    static const char* kWaterfallOrder[] = {"market", "sensitivity", "consensus", "comparables", "news"};
    int round = static_cast<int>(state.transcript.size() - 1);
    for (const char* route : kWaterfallOrder) {
        ++round;
        auto entry = run_step(route, round, state, services);
        state.value_history.push_back(valuation::value(state.inputs));
        state.transcript.push_back(std::move(entry));
    }
}

void run_refinement_loop(RunState& state, RunServices& services, const ConvergenceCriterion& criterion) {
    auto ctx = agent_context(services.gateway, services.config);
    int consecutive_stable = 0;

    while (true) {
        if (consecutive_stable >= criterion.window) {
            state.termination_cause = "converged";
            return;
        }
        if (state.iteration >= criterion.max_iterations) {
            state.termination_cause = "iteration_cap";
            return;
        }

        nlohmann::json history = nlohmann::json::array();
        for (std::size_t i = 1; i < state.transcript.size(); ++i) {
            const auto& entry = state.transcript[i];
            const double prev = state.value_history[i - 1].value_per_share;
            const double now = state.value_history[i].value_per_share;
            history.push_back({{"round", entry.round},
                               {"route", entry.route},
                               {"action", entry.action},
                               {"value_per_share", now},
                               {"delta", now - prev}});
        }

        auto routed = agents::route_next(state.inputs, state.value_history.back(), history, ctx);
        if (routed.decision.route == "end") {
            state.termination_cause = routed.note.empty() ? "routed_end" : "routed_end (" + routed.note + ")";
            return;
        }

        const int round = static_cast<int>(state.transcript.size());
        const double before = state.value_history.back().value_per_share;
        auto entry = run_step(routed.decision.route, round, state, services);
        if (!routed.decision.instruction.empty()) {
            entry.note = entry.note.empty() ? "router: " + routed.decision.instruction
                                            : entry.note + " (router: " + routed.decision.instruction + ")";
        }
        state.value_history.push_back(valuation::value(state.inputs));
        state.transcript.push_back(std::move(entry));
        ++state.iteration;

        const double after = state.value_history.back().value_per_share;
        const double scale = std::fabs(before);
        const double delta = scale > 1e-12 ? std::fabs(after - before) / scale : std::fabs(after - before);
        if (delta < criterion.rel_tolerance)
            ++consecutive_stable;
        else
            consecutive_stable = 0;
    }
}

std::vector<RoundValue> replay_value_history(const valuation::ValuationInputs& initial_inputs,
                                             const std::vector<TranscriptEntry>& transcript) {
    // Replay re-applies the recorded changes verbatim; the guardrails were
    // already enforced when the patches went in.
    const agents::PatchGuardrails permissive{1e18, 1e18};
    valuation::ValuationInputs inputs = initial_inputs;
    std::vector<RoundValue> history;
    for (const auto& entry : transcript) {
        if (entry.round == 0) {
            history.push_back(RoundValue::from(valuation::value(inputs)));
            continue;
        }
        if (entry.action == "applied" && entry.patch) agents::apply_patch(inputs, *entry.patch, permissive);
        history.push_back(RoundValue::from(valuation::value(inputs)));
    }
    return history;
}

llm::Gateway make_gateway(const RunConfig& config) {
    llm::TemplateStore templates(config.prompts_dir);

    auto build_backend = [&config](const std::string& name) -> std::shared_ptr<llm::Backend> {
        if (name == "scripted")
            return std::make_shared<llm::ScriptedBackend>(llm::ScriptedRules::from_file(config.scripted_rules_path));
        if (name == "remote") return std::make_shared<llm::HttpChatBackend>(config.remote);
        raise(ErrorCode::ConfigError, "unknown backend \"" + name + "\"");
    };

    llm::Gateway gateway(std::move(templates), build_backend(config.backend));
    for (const auto& [role, name] : config.backend_overrides) gateway.set_backend(role, build_backend(name));
    return gateway;
}

store::RunRecord run_full_valuation(const std::string& ticker, const RunConfig& config, const std::string& as_of,
                                    std::optional<util::RunClock> clock_override) {
    util::RunClock clock = clock_override ? *clock_override
                          : as_of.empty() ? util::RunClock::system()
                                          : util::RunClock::at(as_of);

    // Data resolution comes first: a ticker without fixtures fails before any
    // backend call.
    auto snapshot = fundamentals::load_fundamentals(ticker, config.fixtures_source, as_of, clock);

    store::RunRecord record;
    record.created_at = util::now_utc_timestamp();
    record.identity = snapshot.identity;
    record.as_of = snapshot.as_of;
    record.config_hash = config.config_hash();
    record.run_id = store::new_run_id(ticker, snapshot.as_of, record.config_hash);

    auto gateway = make_gateway(config);
    RunServices services{gateway, config, clock, ticker, snapshot.as_of};

    RunState state = make_initial_state(snapshot, config.macro);
    record.initial_inputs = state.inputs;

    try {
        run_waterfall(state, services);
        run_refinement_loop(state, services, config.convergence);

        // hand-off recomputation before the writer sees anything
        auto final_value = valuation::value(state.inputs);

        auto charts = reporting::make_charts(state.inputs, state.transcript);
        auto report = reporting::write_report(state.inputs, final_value, state.transcript, charts, gateway, config);
        record.report_paths =
            reporting::render_report(report.draft, charts, state.transcript, config.out_dir, record.run_id);

        record.final_inputs = state.inputs;
        record.final_value = final_value;
        record.decision = store::decision_of(final_value, state.inputs.financials.market_price, config.decision_band);
        record.transcript = state.transcript;
        for (const auto& v : state.value_history) record.value_history.push_back(RoundValue::from(v));
        record.termination_cause = state.termination_cause;
        store::persist_run(record, config.runs_dir);
        return record;
    } catch (const Error& e) {
        record.final_inputs = state.inputs;
        record.transcript = state.transcript;
        for (const auto& v : state.value_history) record.value_history.push_back(RoundValue::from(v));
        record.termination_cause = std::string("error:") + error_code_name(e.code());
        store::persist_run(record, config.runs_dir);
        throw;
    }
}

void to_json(nlohmann::json& j, const RoundValue& v) {
    j = nlohmann::json{{"value_per_share", v.value_per_share}, {"enterprise_value", v.enterprise_value},
                       {"equity_value", v.equity_value},       {"pv_explicit", v.pv_explicit},
                       {"pv_terminal", v.pv_terminal},         {"terminal_value", v.terminal_value}};
}

void from_json(const nlohmann::json& j, RoundValue& v) {
    j.at("value_per_share").get_to(v.value_per_share);
    j.at("enterprise_value").get_to(v.enterprise_value);
    j.at("equity_value").get_to(v.equity_value);
    j.at("pv_explicit").get_to(v.pv_explicit);
    j.at("pv_terminal").get_to(v.pv_terminal);
    j.at("terminal_value").get_to(v.terminal_value);
}

void to_json(nlohmann::json& j, const TranscriptEntry& v) {
    j = nlohmann::json{{"round", v.round},   {"route", v.route}, {"action", v.action},
                       {"note", v.note},     {"tables", v.tables}, {"value", v.value}};
    if (v.patch) j["patch"] = *v.patch;
}

void from_json(const nlohmann::json& j, TranscriptEntry& v) {
    j.at("round").get_to(v.round);
    j.at("route").get_to(v.route);
    j.at("action").get_to(v.action);
    j.at("note").get_to(v.note);
    v.tables = j.at("tables");
    j.at("value").get_to(v.value);
    if (j.contains("patch")) v.patch = j.at("patch").get<agents::InputPatch>();
    else v.patch.reset();
}

} // namespace dbot::orch
