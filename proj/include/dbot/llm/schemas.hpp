#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbot/llm/gateway.hpp"

namespace dbot::llm {

// Registered structured-output schemas. Agents exchange machine-checkable
// JSON embedded in completions; anything else is a typed error so the caller
// can re-prompt (bounded) instead of improvising.
//   route-decision   {"route": market|sensitivity|consensus|comparables|news|end, "instruction"?}
//   input-patch      {"changes": [{"driver_path", "new_value"}], "rationale"?}
//   critique         {"issues": [{"category", "detail"}], "verdict": pass|fail}
//   chart-spec       {"chart_id", "kind": line|bar|table-heatmap, "series": [{"name", "values"}], ...}
//   news-relevance   {"relevance": 0..1, "rationale"?}
//   sensitivity-spec {"row_driver", "row_values", "col_driver", "col_values", "changes"?, "rationale"?}
//   news-digest      {"summary", "driver_implications": [{"driver_path", "direction", "rationale"}]}
std::vector<std::string> registered_schemas();

// Extracts the first well-formed JSON object from the completion text and
// validates it. Total: either a valid object comes back or MalformedOutput
// (nothing parseable) / SchemaViolation (parseable but invalid) is thrown.
// Never fabricates fields.
nlohmann::json parse_structured(const Completion& completion, const std::string& schema_id);

// complete + parse with up to `max_reprompts` re-prompts on malformed or
// schema-violating output, then the last error propagates.
nlohmann::json complete_structured(Gateway& gateway, const std::string& role, const PromptEnvelope& envelope,
                                   const std::string& schema_id, int max_reprompts = 2);

} // namespace dbot::llm
