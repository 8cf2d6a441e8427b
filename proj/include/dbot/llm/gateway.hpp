#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dbot::llm {

struct PromptEnvelope {
    std::string template_id;
    std::string rendered_text;
    std::vector<std::string> attachments; // serialized tables / spreadsheet views
    double temperature = 0.0;
    std::string context_fingerprint; // hash of template_id + attachment digests
};

struct Completion {
    std::string text;
    std::string backend_id;
    long latency_ms = 0;
    int attempt = 1;
};

std::string envelope_fingerprint(const std::string& template_id, const std::vector<std::string>& attachments);

// Templates are data: `prompts/<template_id>.txt` with `{placeholder}`
// substitution. Rendering is deterministic; unresolved placeholders raise
// MissingPlaceholder listing every missing key.
class TemplateStore {
public:
    explicit TemplateStore(std::string directory);

    PromptEnvelope render(const std::string& template_id, const std::map<std::string, std::string>& context,
                          std::vector<std::string> attachments = {}, double temperature = 0.0) const;

    const std::string& directory() const { return directory_; }

private:
    std::string directory_;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual Completion complete(const PromptEnvelope& envelope) = 0;
    virtual std::string id() const = 0;
};

struct ScriptedRule {
    std::string template_id;
    std::optional<std::string> fingerprint; // absent = any
    std::string response;
    int max_uses = 0; // 0 = unlimited
};

// Immutable rule table; first matching rule with remaining uses wins. An
// unmatched prompt is an error, never silent improvisation.
struct ScriptedRules {
    std::vector<ScriptedRule> rules;

    static ScriptedRules from_json(const nlohmann::json& doc);
    static ScriptedRules from_file(const std::string& path);
};

class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(ScriptedRules rules);
    Completion complete(const PromptEnvelope& envelope) override;
    std::string id() const override { return "scripted"; }

private:
    ScriptedRules rules_;
    std::vector<int> uses_;
    std::mutex mutex_;
};

struct RemoteBackendConfig {
    std::string endpoint;  // e.g. https://host/v1/chat/completions
    std::string model;
    std::string token_env = "API_TOKEN";
    int max_attempts = 3;
};

// Chat-completion adapter. The transport is injectable so the retry contract
// is testable offline; the default transport posts JSON over httplib.
class HttpChatBackend : public Backend {
public:
    // Returns the raw response body; throws Error(ProviderError) with the
    // retryable flag set for transient failures.
    using Transport = std::function<std::string(const std::string& endpoint, const std::string& body)>;

    explicit HttpChatBackend(RemoteBackendConfig config, Transport transport = nullptr);
    Completion complete(const PromptEnvelope& envelope) override;
    std::string id() const override { return "remote:" + config_.model; }

private:
    RemoteBackendConfig config_;
    Transport transport_;
};

// Shared across threads; per-role backend registry with a default. Each
// complete() call is independent.
class Gateway {
public:
    Gateway(TemplateStore templates, std::shared_ptr<Backend> default_backend);

    void set_backend(const std::string& role, std::shared_ptr<Backend> backend);
    Backend& backend_for(const std::string& role);

    PromptEnvelope render(const std::string& template_id, const std::map<std::string, std::string>& context,
                          std::vector<std::string> attachments = {}, double temperature = 0.0) const;
    Completion complete(const std::string& role, const PromptEnvelope& envelope);

    const TemplateStore& templates() const { return templates_; }

private:
    TemplateStore templates_;
    std::shared_ptr<Backend> default_backend_;
    std::map<std::string, std::shared_ptr<Backend>> by_role_;
};

} // namespace dbot::llm
