#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbot/valuation/types.hpp"

namespace dbot::agents {

enum class SourceAgent { Market, Sensitivity, Consensus, Comparables, News };
const char* source_agent_name(SourceAgent agent);

struct DriverChange {
    std::string driver_path;
    double old_value = 0.0;
    double new_value = 0.0;
};

// The unit of agent -> supervisor communication: a proposed change set with a
// rationale. Application is atomic; a rejected patch leaves the inputs
// bit-identical to their pre-call state.
struct InputPatch {
    std::string patch_id;
    SourceAgent source_agent = SourceAgent::Market;
    std::vector<DriverChange> changes;
    std::string rationale;
};

// Per-round movement bound. Unbounded LLM-proposed jumps would destroy run
// stability, so each change may move at most max_rel_change relative to the
// prior value (inclusive); near-zero priors get an absolute allowance.
struct PatchGuardrails {
    double max_rel_change = 0.50;
    double zero_prior_abs = 0.10;
};

// Builds a patch from a validated input-patch JSON object, capturing the
// current value at each path as old_value. UnknownDriver paths become
// PatchRejected here so the caller logs instead of crashing.
InputPatch patch_from_json(const nlohmann::json& doc, SourceAgent agent, const std::string& patch_id,
                           const valuation::ValuationInputs& inputs);

// Applies atomically: all changes pass guardrails and the patched inputs keep
// every invariant, or PatchRejected is thrown and nothing moves. An applied
// patch (even an empty one) bumps revision and appends patch_id to provenance.
void apply_patch(valuation::ValuationInputs& inputs, const InputPatch& patch, const PatchGuardrails& guardrails);

struct RouteDecision {
    std::string route; // market | sensitivity | consensus | comparables | news | end
    std::string instruction;
};

void to_json(nlohmann::json& j, const DriverChange& v);
void from_json(const nlohmann::json& j, DriverChange& v);
void to_json(nlohmann::json& j, const InputPatch& v);
void from_json(const nlohmann::json& j, InputPatch& v);
void to_json(nlohmann::json& j, const RouteDecision& v);
void from_json(const nlohmann::json& j, RouteDecision& v);

} // namespace dbot::agents
