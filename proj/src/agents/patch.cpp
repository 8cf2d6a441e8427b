#include "dbot/agents/patch.hpp"

#include <cmath>

#include "dbot/error.hpp"
#include "dbot/valuation/driver_paths.hpp"

namespace dbot::agents {

namespace {

void check_guardrail(const DriverChange& change, const PatchGuardrails& guardrails) {
    const double magnitude = std::fabs(change.new_value - change.old_value);
    if (std::fabs(change.old_value) > 1e-12) {
        const double allowed = guardrails.max_rel_change * std::fabs(change.old_value);
        if (magnitude > allowed)
            raise(ErrorCode::PatchRejected,
                  "change to " + change.driver_path + " moves " + std::to_string(magnitude) +
                      " which exceeds the per-round bound of " + std::to_string(allowed));
    } else if (magnitude > guardrails.zero_prior_abs) {
        raise(ErrorCode::PatchRejected, "change to " + change.driver_path +
                                            " exceeds the zero-prior absolute allowance of " +
                                            std::to_string(guardrails.zero_prior_abs));
    }
}

} // namespace

const char* source_agent_name(SourceAgent agent) {
    switch (agent) {
        case SourceAgent::Market: return "market";
        case SourceAgent::Sensitivity: return "sensitivity";
        case SourceAgent::Consensus: return "consensus";
        case SourceAgent::Comparables: return "comparables";
        case SourceAgent::News: return "news";
    }
    return "unknown";
}

InputPatch patch_from_json(const nlohmann::json& doc, SourceAgent agent, const std::string& patch_id,
                           const valuation::ValuationInputs& inputs) {
    InputPatch patch;
    patch.patch_id = patch_id;
    patch.source_agent = agent;
    patch.rationale = doc.value("rationale", "");
    for (const auto& entry : doc.at("changes")) {
        DriverChange change;
        entry.at("driver_path").get_to(change.driver_path);
        entry.at("new_value").get_to(change.new_value);
        try {
            change.old_value = valuation::get_value_at(inputs, change.driver_path);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::UnknownDriver)
                raise(ErrorCode::PatchRejected, "patch names unknown driver path \"" + change.driver_path + "\"");
            throw;
        }
        patch.changes.push_back(std::move(change));
    }
    return patch;
}

void apply_patch(valuation::ValuationInputs& inputs, const InputPatch& patch, const PatchGuardrails& guardrails) {
    valuation::ValuationInputs staged = inputs;
    for (const auto& change : patch.changes) {
        double current = 0.0;
        try {
            current = valuation::get_value_at(staged, change.driver_path);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::UnknownDriver)
                raise(ErrorCode::PatchRejected, "patch names unknown driver path \"" + change.driver_path + "\"");
            throw;
        }
        if (std::fabs(current - change.old_value) > 1e-9 * std::max(1.0, std::fabs(current)))
            raise(ErrorCode::PatchRejected, "stale patch: " + change.driver_path + " is " +
                                                std::to_string(current) + ", patch recorded " +
                                                std::to_string(change.old_value));
        check_guardrail(change, guardrails);
        valuation::set_value_at(staged, change.driver_path, change.new_value);
    }
    auto failures = valuation::check_inputs(staged);
    if (!failures.empty())
        raise(ErrorCode::PatchRejected, "patch " + patch.patch_id + " violates invariants: " + failures.front());

    staged.revision = inputs.revision + 1;
    staged.provenance.push_back(patch.patch_id);
    inputs = std::move(staged);
}

void to_json(nlohmann::json& j, const DriverChange& v) {
    j = nlohmann::json{{"driver_path", v.driver_path}, {"old_value", v.old_value}, {"new_value", v.new_value}};
}

void from_json(const nlohmann::json& j, DriverChange& v) {
    j.at("driver_path").get_to(v.driver_path);
    j.at("old_value").get_to(v.old_value);
    j.at("new_value").get_to(v.new_value);
}

void to_json(nlohmann::json& j, const InputPatch& v) {
    j = nlohmann::json{{"patch_id", v.patch_id},
                       {"source_agent", source_agent_name(v.source_agent)},
                       {"changes", v.changes},
                       {"rationale", v.rationale}};
}

void from_json(const nlohmann::json& j, InputPatch& v) {
    j.at("patch_id").get_to(v.patch_id);
    const auto name = j.at("source_agent").get<std::string>();
    if (name == "market") v.source_agent = SourceAgent::Market;
    else if (name == "sensitivity") v.source_agent = SourceAgent::Sensitivity;
    else if (name == "consensus") v.source_agent = SourceAgent::Consensus;
    else if (name == "comparables") v.source_agent = SourceAgent::Comparables;
    else if (name == "news") v.source_agent = SourceAgent::News;
    else raise(ErrorCode::SchemaViolation, "unknown source_agent \"" + name + "\"");
    j.at("changes").get_to(v.changes);
    j.at("rationale").get_to(v.rationale);
}

void to_json(nlohmann::json& j, const RouteDecision& v) {
    j = nlohmann::json{{"route", v.route}, {"instruction", v.instruction}};
}

void from_json(const nlohmann::json& j, RouteDecision& v) {
    j.at("route").get_to(v.route);
    v.instruction = j.value("instruction", "");
}

} // namespace dbot::agents
