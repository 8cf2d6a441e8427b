#include "dbot/agents/agents.hpp"

#include <cmath>
#include <cstdio>

#include "dbot/error.hpp"
#include "dbot/llm/schemas.hpp"
#include "dbot/valuation/driver_paths.hpp"
#include "dbot/valuation/engine.hpp"

namespace dbot::agents {

namespace {

AgentOutcome apply_or_reject(valuation::ValuationInputs& inputs, const nlohmann::json& patch_doc,
                             SourceAgent agent, const std::string& patch_id, AgentContext& ctx) {
    AgentOutcome outcome;
    outcome.route = source_agent_name(agent);
    try {
        InputPatch patch = patch_from_json(patch_doc, agent, patch_id, inputs);
        try {
            apply_patch(inputs, patch, ctx.guardrails);
            outcome.action = "applied";
            outcome.note = patch.changes.empty() ? "no changes proposed" : patch.rationale;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PatchRejected) throw;
            outcome.action = "rejected";
            outcome.note = e.detail();
        }
        outcome.patch = std::move(patch); // rejected proposals stay on the record
    } catch (const Error& e) {
        if (e.code() != ErrorCode::PatchRejected) throw;
        outcome.action = "rejected";
        outcome.note = e.detail();
    }
    if (outcome.action == "rejected" && patch_doc.contains("rationale") && patch_doc.at("rationale").is_string())
        outcome.note += " (rationale: " + patch_doc.at("rationale").get<std::string>() + ")";
    return outcome;
}

nlohmann::json inputs_view(const valuation::ValuationInputs& inputs) {
    return nlohmann::json{{"drivers", inputs.drivers}, {"financials", inputs.financials}, {"macro", inputs.macro}};
}

nlohmann::json valuation_view(const valuation::ValuationResult& value) {
    return nlohmann::json{{"value_per_share", value.value_per_share},
                          {"enterprise_value", value.enterprise_value},
                          {"equity_value", value.equity_value},
                          {"terminal_value", value.terminal_value},
                          {"terminal_ev_to_ebitda", value.terminal_ev_to_ebitda},
                          {"price_to_value", value.price_to_value}};
}

} // namespace

std::string format_fraction(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string format_money(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

AgentOutcome run_market_agent(valuation::ValuationInputs& inputs, const valuation::ValuationResult& value,
                              AgentContext& ctx, const std::string& patch_id) {
    auto envelope = ctx.gateway.render(
        "market",
        {{"company_name", inputs.identity.name},
         {"ticker", inputs.identity.ticker},
         {"value_per_share", format_money(value.value_per_share)},
         {"market_price", format_money(inputs.financials.market_price)}},
        {inputs_view(inputs).dump(), valuation_view(value).dump()});
    auto doc = llm::complete_structured(ctx.gateway, "market", envelope, "input-patch");
    return apply_or_reject(inputs, doc, SourceAgent::Market, patch_id, ctx);
}

SensitivityOutcome run_sensitivity_agent(valuation::ValuationInputs& inputs, AgentContext& ctx,
                                         const std::string& patch_id) {
    auto envelope = ctx.gateway.render("sensitivity",
                                       {{"company_name", inputs.identity.name},
                                        {"ticker", inputs.identity.ticker}},
                                       {inputs_view(inputs).dump()});
    auto doc = llm::complete_structured(ctx.gateway, "sensitivity", envelope, "sensitivity-spec");

    valuation::SensitivityAxis row{doc.at("row_driver").get<std::string>(),
                                   doc.at("row_values").get<std::vector<double>>()};
    valuation::SensitivityAxis col{doc.at("col_driver").get<std::string>(),
                                   doc.at("col_values").get<std::vector<double>>()};

    SensitivityOutcome result;
    std::string warning;
    try {
        result.table = valuation::sensitivity_grid(inputs, row, col);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::UnknownDriver) throw;
        // fall back to the default axes around the current drivers
        warning = "axis selection rejected (" + e.detail() + "); using default axes";
        const double margin = inputs.drivers.terminal_margin;
        const double wacc = inputs.drivers.cost_of_capital[0];
        valuation::SensitivityAxis default_row{"terminal_margin", {margin - 0.01, margin, margin + 0.01}};
        valuation::SensitivityAxis default_col{"cost_of_capital", {wacc - 0.01, wacc, wacc + 0.01}};
        result.table = valuation::sensitivity_grid(inputs, default_row, default_col);
    }

    nlohmann::json patch_doc = nlohmann::json{{"changes", nlohmann::json::array()}};
    if (doc.contains("changes")) patch_doc["changes"] = doc.at("changes");
    if (doc.contains("rationale")) patch_doc["rationale"] = doc.at("rationale");
    result.outcome = apply_or_reject(inputs, patch_doc, SourceAgent::Sensitivity, patch_id, ctx);
    if (!warning.empty())
        result.outcome.note = result.outcome.note.empty() ? warning : result.outcome.note + "; " + warning;
    result.outcome.tables["sensitivity"] = result.table;
    return result;
}

AgentOutcome run_consensus_agent(valuation::ValuationInputs& inputs,
                                 const fundamentals::ConsensusEstimates& consensus, AgentContext& ctx,
                                 const std::string& patch_id) {
    auto envelope = ctx.gateway.render(
        "consensus",
        {{"company_name", inputs.identity.name},
         {"ticker", inputs.identity.ticker},
         {"consensus_growth_y1", format_fraction(consensus.revenue_growth_y1)},
         {"consensus_growth_y2", format_fraction(consensus.revenue_growth_y2)},
         {"consensus_margin", format_fraction(consensus.operating_margin_fwd)}},
        {inputs_view(inputs).dump(), nlohmann::json(consensus).dump()});
    auto doc = llm::complete_structured(ctx.gateway, "consensus", envelope, "input-patch");
    auto outcome = apply_or_reject(inputs, doc, SourceAgent::Consensus, patch_id, ctx);
    outcome.tables["consensus"] = consensus;
    return outcome;
}

AgentOutcome run_comparables_agent(valuation::ValuationInputs& inputs, const valuation::ValuationResult& value,
                                   const fundamentals::ComparablesSet& comparables, AgentContext& ctx,
                                   const std::string& patch_id) {
    nlohmann::json peer_table = nlohmann::json::array();
    for (const auto& peer : comparables.peers)
        peer_table.push_back({{"ticker", peer.identity.ticker},
                              {"ev_to_ebitda", peer.ev_to_ebitda},
                              {"revenue_growth", peer.revenue_growth},
                              {"operating_margin", peer.operating_margin}});
    nlohmann::json comparison = {{"own_terminal_ev_to_ebitda", value.terminal_ev_to_ebitda},
                                 {"peers", peer_table}};

    auto envelope = ctx.gateway.render(
        "comparables",
        {{"company_name", inputs.identity.name},
         {"ticker", inputs.identity.ticker},
         {"own_ev_to_ebitda", format_fraction(value.terminal_ev_to_ebitda)}},
        {comparison.dump()});
    auto doc = llm::complete_structured(ctx.gateway, "comparables", envelope, "input-patch");
    auto outcome = apply_or_reject(inputs, doc, SourceAgent::Comparables, patch_id, ctx);
    outcome.tables["comparables"] = comparison;
    return outcome;
}

RouteOutcome route_next(const valuation::ValuationInputs& inputs, const valuation::ValuationResult& value,
                        const nlohmann::json& history, AgentContext& ctx) {
    const double gap = value.value_per_share - inputs.financials.market_price;
    auto envelope = ctx.gateway.render("router",
                                       {{"company_name", inputs.identity.name},
                                        {"ticker", inputs.identity.ticker},
                                        {"value_per_share", format_money(value.value_per_share)},
                                        {"market_price", format_money(inputs.financials.market_price)},
                                        {"gap", format_money(gap)}},
                                       {history.dump()});

    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto completion = ctx.gateway.complete("router", envelope);
        try {
            auto doc = llm::parse_structured(completion, "route-decision");
            RouteOutcome out;
            out.decision.route = doc.at("route").get<std::string>();
            out.decision.instruction = doc.value("instruction", "");
            return out;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MalformedOutput && e.code() != ErrorCode::SchemaViolation) throw;
        }
    }
    RouteOutcome out;
    out.decision.route = "end";
    out.note = "router output malformed twice; fail-safe end";
    return out;
}

} // namespace dbot::agents
