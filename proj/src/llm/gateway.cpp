#include "dbot/llm/gateway.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "dbot/error.hpp"
#include "dbot/util/hash.hpp"

namespace dbot::llm {

namespace {

bool placeholder_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

} // namespace

std::string envelope_fingerprint(const std::string& template_id, const std::vector<std::string>& attachments) {
    std::string material = template_id;
    for (const auto& attachment : attachments) {
        material += '\x1f';
        material += util::digest_hex(attachment);
    }
    return util::digest_hex(material);
}

TemplateStore::TemplateStore(std::string directory) : directory_(std::move(directory)) {}

PromptEnvelope TemplateStore::render(const std::string& template_id,
                                     const std::map<std::string, std::string>& context,
                                     std::vector<std::string> attachments, double temperature) const {
    const auto path = std::filesystem::path(directory_) / (template_id + ".txt");
    std::ifstream file(path);
    if (!file) raise(ErrorCode::NotFound, "no prompt template at " + path.string());
    std::stringstream buffer;
    buffer << file.rdbuf();
    const std::string text = buffer.str();

    std::string rendered;
    rendered.reserve(text.size());
    std::set<std::string> missing;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char c = text[pos];
        if (c != '{') {
            rendered += c;
            ++pos;
            continue;
        }
        std::size_t end = pos + 1;
        while (end < text.size() && placeholder_char(text[end])) ++end;
        if (end > pos + 1 && end < text.size() && text[end] == '}') {
            const std::string key = text.substr(pos + 1, end - pos - 1);
            auto it = context.find(key);
            if (it == context.end()) {
                missing.insert(key);
            } else {
                rendered += it->second;
            }
            pos = end + 1;
        } else {
            rendered += c; // brace not opening a placeholder (e.g. JSON examples)
            ++pos;
        }
    }
    if (!missing.empty()) {
        std::string keys;
        for (const auto& key : missing) {
            if (!keys.empty()) keys += ", ";
            keys += key;
        }
        raise(ErrorCode::MissingPlaceholder, "template " + template_id + " missing context keys: " + keys);
    }
    if (rendered.empty())
        raise(ErrorCode::SchemaViolation, "template " + template_id + " rendered to empty text");

    PromptEnvelope envelope;
    envelope.template_id = template_id;
    envelope.rendered_text = rendered;
    envelope.attachments = std::move(attachments);
    envelope.temperature = temperature;
    envelope.context_fingerprint = envelope_fingerprint(template_id, envelope.attachments);
    return envelope;
}

ScriptedRules ScriptedRules::from_json(const nlohmann::json& doc) {
    ScriptedRules out;
    if (!doc.is_array()) raise(ErrorCode::SchemaViolation, "scripted rules document must be a JSON array");
    for (const auto& entry : doc) {
        ScriptedRule rule;
        if (!entry.contains("template_id") || !entry.contains("response"))
            raise(ErrorCode::SchemaViolation, "scripted rule needs template_id and response");
        entry.at("template_id").get_to(rule.template_id);
        if (entry.contains("fingerprint") && !entry.at("fingerprint").is_null())
            rule.fingerprint = entry.at("fingerprint").get<std::string>();
        const auto& response = entry.at("response");
        rule.response = response.is_string() ? response.get<std::string>() : response.dump();
        if (rule.response.empty())
            raise(ErrorCode::SchemaViolation, "scripted rule for " + rule.template_id + " has an empty response");
        rule.max_uses = entry.value("max_uses", 0);
        out.rules.push_back(std::move(rule));
    }
    return out;
}

ScriptedRules ScriptedRules::from_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(ErrorCode::NotFound, "no scripted rules file at " + path);
    nlohmann::json doc;
    try {
        file >> doc;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::SchemaViolation, "malformed scripted rules in " + path + ": " + e.what());
    }
    return from_json(doc);
}

ScriptedBackend::ScriptedBackend(ScriptedRules rules)
    : rules_(std::move(rules)), uses_(rules_.rules.size(), 0) {}

Completion ScriptedBackend::complete(const PromptEnvelope& envelope) {
    std::lock_guard<std::mutex> lock(mutex_);
    for (std::size_t i = 0; i < rules_.rules.size(); ++i) {
        const ScriptedRule& rule = rules_.rules[i];
        if (rule.template_id != envelope.template_id) continue;
        if (rule.fingerprint && *rule.fingerprint != envelope.context_fingerprint) continue;
        if (rule.max_uses > 0 && uses_[i] >= rule.max_uses) continue;
        ++uses_[i];
        Completion completion;
        completion.text = rule.response;
        completion.backend_id = id();
        completion.latency_ms = 0;
        completion.attempt = 1;
        return completion;
    }
    raise(ErrorCode::NoScriptMatch, "no scripted rule matches template \"" + envelope.template_id +
                                        "\" (fingerprint " + envelope.context_fingerprint + ")");
}

HttpChatBackend::HttpChatBackend(RemoteBackendConfig config, Transport transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    if (!transport_) {
        transport_ = [this](const std::string& endpoint, const std::string& body) -> std::string {
            auto scheme_end = endpoint.find("://");
            if (scheme_end == std::string::npos)
                raise(ErrorCode::ConfigError, "remote endpoint must be an http(s) URL: " + endpoint);
            auto path_start = endpoint.find('/', scheme_end + 3);
            const std::string host = endpoint.substr(0, path_start);
            const std::string path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
            httplib::Client client(host);
            client.set_connection_timeout(10);
            client.set_read_timeout(60);
            httplib::Headers headers;
            const char* token = config_.token_env.empty() ? nullptr : std::getenv(config_.token_env.c_str());
            if (token) headers.emplace("Authorization", std::string("Bearer ") + token);
            auto res = client.Post(path, headers, body, "application/json");
            if (!res)
                throw Error(ErrorCode::ProviderError, "transport failure reaching " + endpoint).set_retryable(true);
            if (res->status >= 500 || res->status == 429)
                throw Error(ErrorCode::ProviderError, "remote returned status " + std::to_string(res->status))
                    .set_retryable(true);
            if (res->status != 200)
                throw Error(ErrorCode::ProviderError, "remote returned status " + std::to_string(res->status))
                    .set_retryable(false);
            return res->body;
        };
    }
}

Completion HttpChatBackend::complete(const PromptEnvelope& envelope) {
    nlohmann::json messages = nlohmann::json::array();
    std::string content = envelope.rendered_text;
    for (const auto& attachment : envelope.attachments) {
        content += "\n\n";
        content += attachment;
    }
    messages.push_back({{"role", "user"}, {"content", content}});
    const nlohmann::json body = {
        {"model", config_.model}, {"messages", messages}, {"temperature", envelope.temperature}};

    const auto start = std::chrono::steady_clock::now();
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        try {
            const std::string raw = transport_(config_.endpoint, body.dump());
            nlohmann::json doc = nlohmann::json::parse(raw, nullptr, false);
            if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty())
                raise(ErrorCode::MalformedOutput, "remote response has no choices");
            Completion completion;
            completion.text = doc["choices"][0]["message"]["content"].get<std::string>();
            completion.backend_id = id();
            completion.attempt = attempt;
            completion.latency_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                          std::chrono::steady_clock::now() - start)
                                                          .count());
            if (completion.text.empty()) raise(ErrorCode::MalformedOutput, "remote returned empty completion text");
            return completion;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ProviderError && e.retryable() && attempt < config_.max_attempts) continue;
            if (e.code() == ErrorCode::ProviderError)
                raise(ErrorCode::BackendUnavailable,
                      "remote backend failed after attempt " + std::to_string(attempt) + ": " + e.detail());
            throw;
        }
    }
    raise(ErrorCode::BackendUnavailable,
          "remote backend failed after attempt " + std::to_string(config_.max_attempts));
}

Gateway::Gateway(TemplateStore templates, std::shared_ptr<Backend> default_backend)
    : templates_(std::move(templates)), default_backend_(std::move(default_backend)) {}

void Gateway::set_backend(const std::string& role, std::shared_ptr<Backend> backend) {
    by_role_[role] = std::move(backend);
}

Backend& Gateway::backend_for(const std::string& role) {
    auto it = by_role_.find(role);
    if (it != by_role_.end()) return *it->second;
    if (!default_backend_) raise(ErrorCode::ConfigError, "no backend configured for role \"" + role + "\"");
    return *default_backend_;
}

PromptEnvelope Gateway::render(const std::string& template_id, const std::map<std::string, std::string>& context,
                               std::vector<std::string> attachments, double temperature) const {
    return templates_.render(template_id, context, std::move(attachments), temperature);
}

Completion Gateway::complete(const std::string& role, const PromptEnvelope& envelope) {
    return backend_for(role).complete(envelope);
}

} // namespace dbot::llm
