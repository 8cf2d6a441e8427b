#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dbot/orchestrator/run.hpp"
#include "dbot/valuation/types.hpp"

namespace dbot::store {

enum class Decision { Buy, Hold, Sell };
const char* decision_name(Decision decision);
Decision decision_from_name(const std::string& name);

// Buy when value clears the market price by more than the band, Sell when it
// falls short by more than the band, Hold inside it. The band keeps
// knife-edge cases from flipping run to run.
Decision decision_of(const valuation::ValuationResult& value, double market_price, double band = 0.10);

// Complete, replayable trace of one run. initial_inputs plus the transcript's
// applied patches reproduce value_history bit-exactly.
struct RunRecord {
    std::string run_id;
    std::string created_at; // ISO-8601 timestamp
    fundamentals::CompanyIdentity identity;
    std::string as_of;
    std::string config_hash;
    valuation::ValuationInputs initial_inputs;
    valuation::ValuationInputs final_inputs;
    valuation::ValuationResult final_value;
    Decision decision = Decision::Hold;
    std::vector<orch::TranscriptEntry> transcript;
    std::vector<orch::RoundValue> value_history;
    std::vector<std::string> report_paths;
    std::string termination_cause;
};

// Plain-file storage under <runs_dir>/<run_id>/record.json; load(persist(x))
// is bit-exact. Writers use unique run ids; reads take no locks.
std::string persist_run(const RunRecord& record, const std::string& runs_dir);
RunRecord load_run(const std::string& run_id, const std::string& runs_dir);
std::vector<std::string> list_runs(const std::string& runs_dir, const std::string& ticker_filter = "");

std::string new_run_id(const std::string& ticker, const std::string& as_of, const std::string& config_hash);

void to_json(nlohmann::json& j, const RunRecord& v);
void from_json(const nlohmann::json& j, RunRecord& v);

} // namespace dbot::store
