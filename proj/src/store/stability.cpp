#include "dbot/store/stability.hpp"

#include <cmath>
#include <future>

#include "dbot/error.hpp"
#include "dbot/orchestrator/full_run.hpp"

namespace dbot::store {

double flip_rate(const std::vector<Decision>& decisions) {
    if (decisions.size() < 2) return 0.0;
    int flips = 0;
    for (std::size_t i = 1; i < decisions.size(); ++i)
        if (decisions[i] != decisions[i - 1]) ++flips;
    return static_cast<double>(flips) / static_cast<double>(decisions.size() - 1);
}

PerturbationMode perturbation_mode_from_name(const std::string& name) {
    if (name == "none") return PerturbationMode::None;
    if (name == "paraphrase-templates") return PerturbationMode::ParaphraseTemplates;
    if (name == "temperature") return PerturbationMode::Temperature;
    raise(ErrorCode::ConfigError, "unknown perturbation mode \"" + name + "\"");
}

const char* perturbation_mode_name(PerturbationMode mode) {
    switch (mode) {
        case PerturbationMode::None: return "none";
        case PerturbationMode::ParaphraseTemplates: return "paraphrase-templates";
        case PerturbationMode::Temperature: return "temperature";
    }
    return "none";
}

StabilityMetrics stability_report(const std::string& ticker, int n_runs, PerturbationMode mode,
                                  const RunConfig& config, const std::vector<std::string>& paraphrase_dirs) {
    if (n_runs < 1) raise(ErrorCode::ConfigError, "stability needs n_runs >= 1");
    if (mode == PerturbationMode::ParaphraseTemplates && paraphrase_dirs.empty())
        raise(ErrorCode::ConfigError, "paraphrase-templates mode needs at least one template directory");

    StabilityMetrics metrics;
    metrics.n_runs = n_runs;
    for (int i = 0; i < n_runs; ++i) {
        RunConfig run_config = config;
        if (mode == PerturbationMode::ParaphraseTemplates)
            run_config.prompts_dir = paraphrase_dirs[static_cast<std::size_t>(i) % paraphrase_dirs.size()];
        if (mode == PerturbationMode::Temperature && run_config.report_temperature == 0.0)
            run_config.report_temperature = 0.7;
        auto record = orch::run_full_valuation(ticker, run_config);
        metrics.values.push_back(record.final_value.value_per_share);
        metrics.decisions.push_back(record.decision);
    }

    // shifted two-pass: bit-identical runs give exactly zero deviation
    const double offset = metrics.values.front();
    double shifted_sum = 0.0;
    for (double v : metrics.values) shifted_sum += v - offset;
    metrics.value_mean = offset + shifted_sum / static_cast<double>(n_runs);
    double sq = 0.0;
    for (double v : metrics.values) sq += (v - metrics.value_mean) * (v - metrics.value_mean);
    metrics.value_std = std::sqrt(sq / static_cast<double>(n_runs));
    metrics.dispersion = std::fabs(metrics.value_mean) > 1e-12 ? metrics.value_std / std::fabs(metrics.value_mean)
                                                               : 0.0;
    metrics.decision_flip_rate = flip_rate(metrics.decisions);
    return metrics;
}

BacktestSummary backtest(const std::string& ticker, const std::vector<std::string>& as_of_dates,
                         const RunConfig& config) {
    BacktestSummary summary;
    for (const auto& date : as_of_dates) {
        BacktestRow row;
        row.as_of = date;
        try {
            auto record = orch::run_full_valuation(ticker, config, date, util::RunClock::at(date));
            row.value_per_share = record.final_value.value_per_share;
            row.market_price = record.final_inputs.financials.market_price;
            row.decision = record.decision;
            row.run_id = record.run_id;
            summary.records.push_back(std::move(record));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotFound && e.code() != ErrorCode::MissingFixture) throw;
            row.skip_note = "skipped: " + e.detail();
        }
        summary.rows.push_back(std::move(row));
    }
    return summary;
}

std::vector<RunRecord> run_batch(const std::vector<std::string>& tickers, const RunConfig& config) {
    std::vector<std::future<RunRecord>> futures;
    futures.reserve(tickers.size());
    for (const auto& ticker : tickers)
        futures.push_back(std::async(std::launch::async,
                                     [ticker, &config] { return orch::run_full_valuation(ticker, config); }));

    std::vector<RunRecord> records;
    std::exception_ptr first_error;
    for (auto& future : futures) {
        try {
            records.push_back(future.get());
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return records;
}

} // namespace dbot::store
