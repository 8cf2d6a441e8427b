#pragma once

#include <string>
#include <vector>

#include "dbot/store/run_store.hpp"

namespace dbot::store {

// Run-to-run stability aggregates. decision_flip_rate is the fraction of
// adjacent run pairs whose decisions differ; it is order-sensitive.
struct StabilityMetrics {
    int n_runs = 0;
    double value_mean = 0.0;
    double value_std = 0.0;
    double dispersion = 0.0; // std / mean
    double decision_flip_rate = 0.0;
    std::vector<Decision> decisions;
    std::vector<double> values;
};

double flip_rate(const std::vector<Decision>& decisions);

enum class PerturbationMode { None, ParaphraseTemplates, Temperature };
PerturbationMode perturbation_mode_from_name(const std::string& name);
const char* perturbation_mode_name(PerturbationMode mode);

// Runs the pipeline n times under the chosen perturbation and aggregates.
// With the scripted backend and mode none, dispersion and flip rate are 0 by
// the determinism invariant. paraphrase-templates cycles alternate template
// directories (same ids, different phrasing); temperature raises the report
// temperature, which only matters on a remote backend.
StabilityMetrics stability_report(const std::string& ticker, int n_runs, PerturbationMode mode,
                                  const RunConfig& config,
                                  const std::vector<std::string>& paraphrase_dirs = {});

struct BacktestRow {
    std::string as_of;
    double value_per_share = 0.0;
    double market_price = 0.0;
    Decision decision = Decision::Hold;
    std::string run_id;
    std::string skip_note; // non-empty when the date had no fixture
};

struct BacktestSummary {
    std::vector<RunRecord> records;
    std::vector<BacktestRow> rows;
};

// One run per as_of date with the run clock pinned to that date. Missing
// fixtures skip the date with a note instead of failing the whole backtest.
BacktestSummary backtest(const std::string& ticker, const std::vector<std::string>& as_of_dates,
                         const RunConfig& config);

// `report` per ticker, concurrently; record content is identical to serial
// execution because runs share no mutable state.
std::vector<RunRecord> run_batch(const std::vector<std::string>& tickers, const RunConfig& config);

} // namespace dbot::store
