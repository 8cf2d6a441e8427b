#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "dbot/agents/patch.hpp"
#include "dbot/fundamentals/types.hpp"
#include "dbot/llm/gateway.hpp"
#include "dbot/valuation/types.hpp"

namespace dbot::agents {

struct AgentContext {
    llm::Gateway& gateway;
    PatchGuardrails guardrails;
    double news_theta1 = 0.3;
    double news_theta2 = 0.6;
};

// What one agent step did to the run: the patch it applied (or had rejected),
// any tables worth keeping in the transcript, and a note for the record.
struct AgentOutcome {
    std::string route;
    std::string action; // applied | rejected | skipped
    std::optional<InputPatch> patch;
    std::string note;
    nlohmann::json tables = nlohmann::json::object();
};

// Proposes driver changes reconciling value with the market price. A patch
// that violates invariants or guardrails is rejected and logged; the inputs
// are untouched in that case.
AgentOutcome run_market_agent(valuation::ValuationInputs& inputs, const valuation::ValuationResult& value,
                              AgentContext& ctx, const std::string& patch_id);

// Lets the LLM pick two drivers to sweep (falling back to
// terminal_margin x cost_of_capital on an unknown selection), computes the
// grid, and applies an optional patch.
struct SensitivityOutcome {
    AgentOutcome outcome;
    valuation::SensitivityTable table;
};
SensitivityOutcome run_sensitivity_agent(valuation::ValuationInputs& inputs, AgentContext& ctx,
                                         const std::string& patch_id);

AgentOutcome run_consensus_agent(valuation::ValuationInputs& inputs,
                                 const fundamentals::ConsensusEstimates& consensus, AgentContext& ctx,
                                 const std::string& patch_id);

AgentOutcome run_comparables_agent(valuation::ValuationInputs& inputs, const valuation::ValuationResult& value,
                                   const fundamentals::ComparablesSet& comparables, AgentContext& ctx,
                                   const std::string& patch_id);

// Router: structured route decision over the current gap and per-round value
// deltas. Two malformed outputs default the route to "end" (fail-safe).
struct RouteOutcome {
    RouteDecision decision;
    std::string note;
};
RouteOutcome route_next(const valuation::ValuationInputs& inputs, const valuation::ValuationResult& value,
                        const nlohmann::json& history, AgentContext& ctx);

// Shared helpers for building prompt contexts/attachments.
std::string format_fraction(double v);
std::string format_money(double v);

} // namespace dbot::agents
