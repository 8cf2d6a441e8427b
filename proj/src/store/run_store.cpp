#include "dbot/store/run_store.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "dbot/error.hpp"
#include "dbot/util/hash.hpp"

namespace fs = std::filesystem;

namespace dbot::store {

namespace {

std::atomic<std::uint64_t> run_counter{0};

} // namespace

const char* decision_name(Decision decision) {
    switch (decision) {
        case Decision::Buy: return "Buy";
        case Decision::Hold: return "Hold";
        case Decision::Sell: return "Sell";
    }
    return "Hold";
}

Decision decision_from_name(const std::string& name) {
    if (name == "Buy") return Decision::Buy;
    if (name == "Sell") return Decision::Sell;
    if (name == "Hold") return Decision::Hold;
    raise(ErrorCode::SchemaViolation, "unknown decision \"" + name + "\"");
}

Decision decision_of(const valuation::ValuationResult& value, double market_price, double band) {
    if (!(market_price > 0.0)) raise(ErrorCode::DegenerateInput, "market_price must be > 0 to take a decision");
    if (value.value_per_share > market_price * (1.0 + band)) return Decision::Buy;
    if (value.value_per_share < market_price * (1.0 - band)) return Decision::Sell;
    return Decision::Hold;
}

std::string new_run_id(const std::string& ticker, const std::string& as_of, const std::string& config_hash) {
    const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
    const auto counter = run_counter.fetch_add(1);
    const std::string material = ticker + "|" + as_of + "|" + config_hash + "|" + std::to_string(now) + "|" +
                                 std::to_string(counter);
    return ticker + "-" + as_of + "-" + util::digest_hex(material).substr(0, 8);
}

std::string persist_run(const RunRecord& record, const std::string& runs_dir) {
    if (record.run_id.empty()) raise(ErrorCode::InvariantViolation, "cannot persist a record without run_id");
    const fs::path dir = fs::path(runs_dir) / record.run_id;
    fs::create_directories(dir);
    const fs::path path = dir / "record.json";
    std::ofstream file(path);
    file << nlohmann::json(record).dump(2) << "\n";
    if (!file) raise(ErrorCode::ProviderError, "failed writing " + path.string());
    return path.string();
}

RunRecord load_run(const std::string& run_id, const std::string& runs_dir) {
    const fs::path path = fs::path(runs_dir) / run_id / "record.json";
    std::ifstream file(path);
    if (!file) raise(ErrorCode::NotFound, "no run record at " + path.string());
    nlohmann::json doc;
    try {
        file >> doc;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::SchemaViolation, "malformed run record " + path.string() + ": " + e.what());
    }
    try {
        return doc.get<RunRecord>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::SchemaViolation, "run record " + path.string() + " fails the schema: " + e.what());
    }
}

std::vector<std::string> list_runs(const std::string& runs_dir, const std::string& ticker_filter) {
    std::vector<std::string> ids;
    if (!fs::is_directory(runs_dir)) return ids;
    for (const auto& entry : fs::directory_iterator(runs_dir)) {
        if (!entry.is_directory()) continue;
        if (!fs::exists(entry.path() / "record.json")) continue;
        const std::string id = entry.path().filename().string();
        if (!ticker_filter.empty() && id.rfind(ticker_filter + "-", 0) != 0) continue;
        ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void to_json(nlohmann::json& j, const RunRecord& v) {
    j = nlohmann::json{{"run_id", v.run_id},
                       {"created_at", v.created_at},
                       {"identity", v.identity},
                       {"as_of", v.as_of},
                       {"config_hash", v.config_hash},
                       {"initial_inputs", v.initial_inputs},
                       {"final_inputs", v.final_inputs},
                       {"final_value", v.final_value},
                       {"decision", decision_name(v.decision)},
                       {"transcript", v.transcript},
                       {"value_history", v.value_history},
                       {"report_paths", v.report_paths},
                       {"termination_cause", v.termination_cause}};
}

void from_json(const nlohmann::json& j, RunRecord& v) {
    j.at("run_id").get_to(v.run_id);
    j.at("created_at").get_to(v.created_at);
    j.at("identity").get_to(v.identity);
    j.at("as_of").get_to(v.as_of);
    j.at("config_hash").get_to(v.config_hash);
    j.at("initial_inputs").get_to(v.initial_inputs);
    j.at("final_inputs").get_to(v.final_inputs);
    j.at("final_value").get_to(v.final_value);
    v.decision = decision_from_name(j.at("decision").get<std::string>());
    j.at("transcript").get_to(v.transcript);
    j.at("value_history").get_to(v.value_history);
    j.at("report_paths").get_to(v.report_paths);
    j.at("termination_cause").get_to(v.termination_cause);
}

} // namespace dbot::store
