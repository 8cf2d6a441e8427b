#include "dbot/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dbot/error.hpp"
#include "dbot/util/hash.hpp"

namespace fs = std::filesystem;

namespace dbot {

namespace {

std::string trim(const std::string& text) {
    auto begin = text.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    auto end = text.find_last_not_of(" \t\r");
    return text.substr(begin, end - begin + 1);
}

std::string unquote(const std::string& text) {
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') return text.substr(1, text.size() - 2);
    return text;
}

double to_double(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        double parsed = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return parsed;
    } catch (const std::exception&) {
        raise(ErrorCode::ConfigError, "key \"" + key + "\" expects a number, got \"" + value + "\"");
    }
}

int to_int(const std::string& value, const std::string& key) {
    const double parsed = to_double(value, key);
    const int as_int = static_cast<int>(parsed);
    if (static_cast<double>(as_int) != parsed)
        raise(ErrorCode::ConfigError, "key \"" + key + "\" expects an integer, got \"" + value + "\"");
    return as_int;
}

std::string read_file_or_empty(const fs::path& path) {
    std::ifstream file(path);
    if (!file) return "";
    std::stringstream buffer;
    buffer << file.rdbuf();
    return buffer.str();
}

} // namespace

std::map<std::string, std::string> parse_flat_toml(const std::string& text) {
    std::map<std::string, std::string> entries;
    std::istringstream stream(text);
    std::string line;
    int line_number = 0;
    while (std::getline(stream, line)) {
        ++line_number;
        // strip comments outside quotes
        bool in_string = false;
        std::string code;
        for (char c : line) {
            if (c == '"') in_string = !in_string;
            if (c == '#' && !in_string) break;
            code += c;
        }
        code = trim(code);
        if (code.empty()) continue;
        auto eq = code.find('=');
        if (eq == std::string::npos)
            raise(ErrorCode::ConfigError, "config line " + std::to_string(line_number) + " is not key = value");
        const std::string key = trim(code.substr(0, eq));
        const std::string value = unquote(trim(code.substr(eq + 1)));
        if (key.empty())
            raise(ErrorCode::ConfigError, "config line " + std::to_string(line_number) + " has an empty key");
        entries[key] = value;
    }
    return entries;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(ErrorCode::NotFound, "no config file at " + path);
    std::stringstream buffer;
    buffer << file.rdbuf();
    auto entries = parse_flat_toml(buffer.str());

    RunConfig config;
    std::set<std::string> consumed;
    auto take = [&](const std::string& key) -> const std::string* {
        auto it = entries.find(key);
        if (it == entries.end()) return nullptr;
        consumed.insert(key);
        return &it->second;
    };

    if (auto* v = take("fixtures")) config.fixtures_source = *v;
    if (auto* v = take("prompts_dir")) config.prompts_dir = *v;
    if (auto* v = take("runs_dir")) config.runs_dir = *v;
    if (auto* v = take("out_dir")) config.out_dir = *v;
    if (auto* v = take("backend")) config.backend = *v;
    if (auto* v = take("scripted_rules")) config.scripted_rules_path = *v;
    if (auto* v = take("remote.endpoint")) config.remote.endpoint = *v;
    if (auto* v = take("remote.model")) config.remote.model = *v;
    if (auto* v = take("remote.token_env")) config.remote.token_env = *v;
    if (auto* v = take("convergence.rel_tolerance")) config.convergence.rel_tolerance = to_double(*v, "convergence.rel_tolerance");
    if (auto* v = take("convergence.window")) config.convergence.window = to_int(*v, "convergence.window");
    if (auto* v = take("convergence.max_iterations")) config.convergence.max_iterations = to_int(*v, "convergence.max_iterations");
    if (auto* v = take("news.theta1")) config.news_theta1 = to_double(*v, "news.theta1");
    if (auto* v = take("news.theta2")) config.news_theta2 = to_double(*v, "news.theta2");
    if (auto* v = take("patch.max_rel_change")) config.patch_max_rel_change = to_double(*v, "patch.max_rel_change");
    if (auto* v = take("patch.zero_prior_abs")) config.patch_zero_prior_abs = to_double(*v, "patch.zero_prior_abs");
    if (auto* v = take("decision.band")) config.decision_band = to_double(*v, "decision.band");
    if (auto* v = take("report.min_words")) config.report_min_words = to_int(*v, "report.min_words");
    if (auto* v = take("report.max_words")) config.report_max_words = to_int(*v, "report.max_words");
    if (auto* v = take("report.max_revisions")) config.report_max_revisions = to_int(*v, "report.max_revisions");
    if (auto* v = take("report.temperature")) config.report_temperature = to_double(*v, "report.temperature");
    if (auto* v = take("macro.risk_free_rate")) config.macro.risk_free_rate = to_double(*v, "macro.risk_free_rate");
    if (auto* v = take("macro.equity_risk_premium")) config.macro.equity_risk_premium = to_double(*v, "macro.equity_risk_premium");
    if (auto* v = take("macro.marginal_tax_rate")) config.macro.marginal_tax_rate = to_double(*v, "macro.marginal_tax_rate");

    for (const auto& [key, value] : entries) {
        if (consumed.count(key)) continue;
        if (key.rfind("backend.", 0) == 0) {
            config.backend_overrides[key.substr(8)] = value;
            continue;
        }
        raise(ErrorCode::ConfigError, "unknown config key \"" + key + "\"");
    }

    auto failures = config.check();
    if (!failures.empty()) raise(ErrorCode::ConfigError, failures.front());
    return config;
}

std::vector<std::string> RunConfig::check() const {
    std::vector<std::string> failures;
    if (convergence.max_iterations < 1) failures.push_back("convergence.max_iterations must be >= 1");
    if (!(convergence.rel_tolerance > 0.0)) failures.push_back("convergence.rel_tolerance must be > 0");
    if (convergence.window < 1) failures.push_back("convergence.window must be >= 1");
    if (backend != "scripted" && backend != "remote")
        failures.push_back("backend must be \"scripted\" or \"remote\"");
    if (backend == "scripted" && scripted_rules_path.empty())
        failures.push_back("scripted backend needs scripted_rules");
    if (news_theta1 < 0.0 || news_theta1 > 1.0 || news_theta2 < 0.0 || news_theta2 > 1.0)
        failures.push_back("news thresholds must lie in [0, 1]");
    if (report_min_words < 0 || report_max_words < report_min_words)
        failures.push_back("report word bounds must satisfy 0 <= min <= max");
    return failures;
}

std::string RunConfig::config_hash() const {
    std::ostringstream material;
    material << kEngineVersion << '\n'
             << backend << '\n'
             << convergence.rel_tolerance << ',' << convergence.window << ',' << convergence.max_iterations << '\n'
             << news_theta1 << ',' << news_theta2 << '\n'
             << patch_max_rel_change << ',' << patch_zero_prior_abs << '\n'
             << decision_band << '\n'
             << report_min_words << ',' << report_max_words << ',' << report_max_revisions << ','
             << report_temperature << '\n'
             << macro.risk_free_rate << ',' << macro.equity_risk_premium << ',' << macro.marginal_tax_rate << '\n'
             << remote.endpoint << ',' << remote.model << '\n';
    for (const auto& [role, name] : backend_overrides) material << role << '=' << name << '\n';

    // prompts are data; the hash must change when any template changes
    std::vector<fs::path> templates;
    if (fs::is_directory(prompts_dir))
        for (const auto& entry : fs::directory_iterator(prompts_dir))
            if (entry.path().extension() == ".txt") templates.push_back(entry.path());
    std::sort(templates.begin(), templates.end());
    for (const auto& path : templates)
        material << path.filename().string() << ':' << util::digest_hex(read_file_or_empty(path)) << '\n';
    if (!scripted_rules_path.empty())
        material << "rules:" << util::digest_hex(read_file_or_empty(scripted_rules_path)) << '\n';

    return util::digest_hex(material.str());
}

} // namespace dbot
