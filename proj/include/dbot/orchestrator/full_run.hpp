#pragma once

#include "dbot/orchestrator/run.hpp"
#include "dbot/store/run_store.hpp"

namespace dbot::orch {

// The whole pipeline for one ticker: load fixtures, initialize, waterfall,
// refinement, final revaluation, report, decide, persist. An empty as_of
// means "latest fixture at the run clock"; a given as_of also pins the run
// clock so post-dated data cannot leak (backtests rely on this). Hard
// failures persist a partial record before propagating.
store::RunRecord run_full_valuation(const std::string& ticker, const RunConfig& config,
                                    const std::string& as_of = "",
                                    std::optional<util::RunClock> clock = std::nullopt);

} // namespace dbot::orch
