#pragma once

#include <map>
#include <string>

#include "dbot/llm/gateway.hpp"
#include "dbot/valuation/types.hpp"

namespace dbot {

inline constexpr const char* kEngineVersion = "dbot-engine/0.1.0";

struct ConvergenceCriterion {
    double rel_tolerance = 0.01;
    int window = 2;
    int max_iterations = 8;
};

// Everything a run depends on besides the fixtures themselves. Loaded from a
// flat TOML-style key/value file; config_hash() additionally covers the
// prompt templates and scripted rules the run will actually use, so two runs
// with equal hashes are comparable.
struct RunConfig {
    std::string fixtures_source = "fixture:fixtures";
    std::string prompts_dir = "prompts";
    std::string runs_dir = "runs";
    std::string out_dir = "out";

    std::string backend = "scripted"; // scripted | remote
    std::string scripted_rules_path;
    std::map<std::string, std::string> backend_overrides; // agent role -> backend name
    llm::RemoteBackendConfig remote;

    ConvergenceCriterion convergence;
    double news_theta1 = 0.3;
    double news_theta2 = 0.6;
    double patch_max_rel_change = 0.50;
    double patch_zero_prior_abs = 0.10;
    double decision_band = 0.10;
    int report_min_words = 900;
    int report_max_words = 2500;
    int report_max_revisions = 3;
    double report_temperature = 0.0;

    valuation::MacroInputs macro{0.044, 0.05, 0.25};

    static RunConfig from_file(const std::string& path);

    // Covers thresholds, prompts, scripts, and the engine version.
    std::string config_hash() const;

    std::vector<std::string> check() const;
};

// Flat `key = value` parser with dotted keys, quoted strings, and `#`
// comments. Unknown keys raise ConfigError so typos fail loudly.
std::map<std::string, std::string> parse_flat_toml(const std::string& text);

} // namespace dbot
