#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbot/agents/agents.hpp"
#include "dbot/agents/news.hpp"
#include "dbot/config.hpp"
#include "dbot/fundamentals/providers.hpp"
#include "dbot/util/dates.hpp"
#include "dbot/valuation/engine.hpp"

namespace dbot::orch {

struct RoundValue {
    double value_per_share = 0.0;
    double enterprise_value = 0.0;
    double equity_value = 0.0;
    double pv_explicit = 0.0;
    double pv_terminal = 0.0;
    double terminal_value = 0.0;

    static RoundValue from(const valuation::ValuationResult& v);
    bool operator==(const RoundValue&) const = default;
};

struct TranscriptEntry {
    int round = 0;      // 0 = initialization
    std::string route;  // initialize | market | sensitivity | consensus | comparables | news
    std::string action; // initialized | applied | rejected | skipped
    std::string note;
    std::optional<agents::InputPatch> patch;
    nlohmann::json tables = nlohmann::json::object();
    RoundValue value; // valuation after this round
};

// One run's single-writer state: only patch application mutates inputs, the
// transcript is append-only, and value_history holds one entry per completed
// valuation round (round 0 is the initial valuation).
struct RunState {
    valuation::ValuationInputs inputs;
    std::vector<valuation::ValuationResult> value_history;
    std::vector<TranscriptEntry> transcript;
    int iteration = 0; // refinement rounds completed
    std::string termination_cause;
};

struct RunServices {
    llm::Gateway& gateway;
    const RunConfig& config;
    util::RunClock clock;
    std::string ticker;
    std::string as_of;
};

// Assembles the spreadsheet from the snapshot's anchors and macro inputs,
// revision 0, validated.
valuation::ValuationInputs initialize_inputs(const fundamentals::FundamentalsSnapshot& snapshot,
                                             const valuation::MacroInputs& macro);

// initialize_inputs + the round-0 valuation recorded in history/transcript.
RunState make_initial_state(const fundamentals::FundamentalsSnapshot& snapshot,
                            const valuation::MacroInputs& macro);

// The fixed initial sequence (market, sensitivity, consensus, comparables,
// news), each step recomputing the valuation after its patch. Steps with
// missing data are recorded as skipped; agent hard failures propagate.
void run_waterfall(RunState& state, RunServices& services);

// Routed refinement until the per-share value moves less than rel_tolerance
// for `window` consecutive refinement rounds, the router ends the run, or
// max_iterations is reached. The cause lands in state.termination_cause.
void run_refinement_loop(RunState& state, RunServices& services, const ConvergenceCriterion& criterion);

// Recomputes every round's valuation from the initial inputs plus the
// transcript's applied patches. Bit-exact against the recorded history.
std::vector<RoundValue> replay_value_history(const valuation::ValuationInputs& initial_inputs,
                                             const std::vector<TranscriptEntry>& transcript);

// Builds the gateway for one run: fresh scripted backend instances from the
// immutable rule file (so use-counted sequences start clean), or the remote
// adapter, with per-role overrides applied.
llm::Gateway make_gateway(const RunConfig& config);

void to_json(nlohmann::json& j, const RoundValue& v);
void from_json(const nlohmann::json& j, RoundValue& v);
void to_json(nlohmann::json& j, const TranscriptEntry& v);
void from_json(const nlohmann::json& j, TranscriptEntry& v);

} // namespace dbot::orch
