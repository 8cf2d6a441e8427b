#include "dbot/llm/schemas.hpp"

#include <algorithm>

#include "dbot/error.hpp"

namespace dbot::llm {

namespace {

// Finds the end of a balanced JSON object starting at `open` or npos.
std::size_t balanced_object_end(const std::string& text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}') {
            --depth;
            if (depth == 0) return i;
        }
    }
    return std::string::npos;
}

nlohmann::json extract_first_object(const std::string& text) {
    std::size_t pos = text.find('{');
    while (pos != std::string::npos) {
        const std::size_t end = balanced_object_end(text, pos);
        if (end != std::string::npos) {
            auto doc = nlohmann::json::parse(text.substr(pos, end - pos + 1), nullptr, false);
            if (!doc.is_discarded() && doc.is_object()) return doc;
        }
        pos = text.find('{', pos + 1);
    }
    raise(ErrorCode::MalformedOutput, "no parseable JSON object in completion text");
}

void require_field(const nlohmann::json& doc, const char* field, const std::string& schema) {
    if (!doc.contains(field))
        raise(ErrorCode::SchemaViolation, schema + ": missing required field \"" + field + "\"");
}

void require_string(const nlohmann::json& doc, const char* field, const std::string& schema) {
    require_field(doc, field, schema);
    if (!doc.at(field).is_string())
        raise(ErrorCode::SchemaViolation, schema + ": field \"" + field + "\" must be a string");
}

void require_one_of(const nlohmann::json& doc, const char* field, const std::vector<std::string>& literals,
                    const std::string& schema) {
    require_string(doc, field, schema);
    const auto value = doc.at(field).get<std::string>();
    if (std::find(literals.begin(), literals.end(), value) == literals.end())
        raise(ErrorCode::SchemaViolation, schema + ": \"" + value + "\" is not a valid " + field);
}

void require_number_array(const nlohmann::json& doc, const char* field, const std::string& schema) {
    require_field(doc, field, schema);
    if (!doc.at(field).is_array() || doc.at(field).empty())
        raise(ErrorCode::SchemaViolation, schema + ": field \"" + field + "\" must be a non-empty array");
    for (const auto& v : doc.at(field))
        if (!v.is_number()) raise(ErrorCode::SchemaViolation, schema + ": \"" + field + "\" entries must be numbers");
}

void validate_changes(const nlohmann::json& changes, const std::string& schema) {
    if (!changes.is_array()) raise(ErrorCode::SchemaViolation, schema + ": \"changes\" must be an array");
    for (const auto& change : changes) {
        if (!change.is_object() || !change.contains("driver_path") || !change.contains("new_value"))
            raise(ErrorCode::SchemaViolation, schema + ": each change needs driver_path and new_value");
        if (!change.at("driver_path").is_string() || !change.at("new_value").is_number())
            raise(ErrorCode::SchemaViolation, schema + ": change fields have the wrong types");
    }
}

void validate_route_decision(const nlohmann::json& doc) {
    require_one_of(doc, "route", {"market", "sensitivity", "consensus", "comparables", "news", "end"},
                   "route-decision");
}

void validate_input_patch(const nlohmann::json& doc) {
    require_field(doc, "changes", "input-patch");
    validate_changes(doc.at("changes"), "input-patch");
}

void validate_critique(const nlohmann::json& doc) {
    require_one_of(doc, "verdict", {"pass", "fail"}, "critique");
    require_field(doc, "issues", "critique");
    if (!doc.at("issues").is_array()) raise(ErrorCode::SchemaViolation, "critique: \"issues\" must be an array");
    for (const auto& issue : doc.at("issues")) {
        if (!issue.is_object()) raise(ErrorCode::SchemaViolation, "critique: issues must be objects");
        require_one_of(issue, "category", {"length", "unverified_number", "missing_source", "dangling_reference"},
                       "critique");
        require_string(issue, "detail", "critique");
    }
}

void validate_chart_spec(const nlohmann::json& doc) {
    require_string(doc, "chart_id", "chart-spec");
    require_one_of(doc, "kind", {"line", "bar", "table-heatmap"}, "chart-spec");
    require_field(doc, "series", "chart-spec");
    if (!doc.at("series").is_array() || doc.at("series").empty())
        raise(ErrorCode::SchemaViolation, "chart-spec: \"series\" must be a non-empty array");
    for (const auto& series : doc.at("series")) {
        require_string(series, "name", "chart-spec");
        require_number_array(series, "values", "chart-spec");
    }
}

void validate_news_relevance(const nlohmann::json& doc) {
    require_field(doc, "relevance", "news-relevance");
    if (!doc.at("relevance").is_number())
        raise(ErrorCode::SchemaViolation, "news-relevance: \"relevance\" must be a number");
    const double relevance = doc.at("relevance").get<double>();
    if (relevance < 0.0 || relevance > 1.0)
        raise(ErrorCode::SchemaViolation, "news-relevance: relevance must lie in [0, 1]");
}

void validate_sensitivity_spec(const nlohmann::json& doc) {
    require_string(doc, "row_driver", "sensitivity-spec");
    require_string(doc, "col_driver", "sensitivity-spec");
    require_number_array(doc, "row_values", "sensitivity-spec");
    require_number_array(doc, "col_values", "sensitivity-spec");
    if (doc.contains("changes")) validate_changes(doc.at("changes"), "sensitivity-spec");
}

void validate_news_digest(const nlohmann::json& doc) {
    require_string(doc, "summary", "news-digest");
    require_field(doc, "driver_implications", "news-digest");
    if (!doc.at("driver_implications").is_array())
        raise(ErrorCode::SchemaViolation, "news-digest: \"driver_implications\" must be an array");
    for (const auto& implication : doc.at("driver_implications")) {
        require_string(implication, "driver_path", "news-digest");
        require_one_of(implication, "direction", {"up", "down", "unchanged"}, "news-digest");
        require_string(implication, "rationale", "news-digest");
    }
}

} // namespace

std::vector<std::string> registered_schemas() {
    return {"route-decision", "input-patch",      "critique",   "chart-spec",
            "news-relevance", "sensitivity-spec", "news-digest"};
}

nlohmann::json parse_structured(const Completion& completion, const std::string& schema_id) {
    const auto known = registered_schemas();
    if (std::find(known.begin(), known.end(), schema_id) == known.end())
        raise(ErrorCode::ConfigError, "schema \"" + schema_id + "\" is not registered");

    nlohmann::json doc = extract_first_object(completion.text);
    if (schema_id == "route-decision") validate_route_decision(doc);
    else if (schema_id == "input-patch") validate_input_patch(doc);
    else if (schema_id == "critique") validate_critique(doc);
    else if (schema_id == "chart-spec") validate_chart_spec(doc);
    else if (schema_id == "news-relevance") validate_news_relevance(doc);
    else if (schema_id == "sensitivity-spec") validate_sensitivity_spec(doc);
    else if (schema_id == "news-digest") validate_news_digest(doc);
    return doc;
}

nlohmann::json complete_structured(Gateway& gateway, const std::string& role, const PromptEnvelope& envelope,
                                   const std::string& schema_id, int max_reprompts) {
    for (int attempt = 0;; ++attempt) {
        const Completion completion = gateway.complete(role, envelope);
        try {
            return parse_structured(completion, schema_id);
        } catch (const Error& e) {
            const bool reparseable =
                e.code() == ErrorCode::MalformedOutput || e.code() == ErrorCode::SchemaViolation;
            if (!reparseable || attempt >= max_reprompts) throw;
        }
    }
}

} // namespace dbot::llm
