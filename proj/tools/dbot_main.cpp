#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dbot/config.hpp"
#include "dbot/error.hpp"
#include "dbot/orchestrator/full_run.hpp"
#include "dbot/store/stability.hpp"
#include "dbot/valuation/engine.hpp"

using namespace dbot;

namespace {

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound:
        case ErrorCode::SchemaViolation:
        case ErrorCode::InsufficientHistory:
        case ErrorCode::MissingFixture:
        case ErrorCode::MissingPlaceholder:
        case ErrorCode::ConfigError:
            return 2;
        case ErrorCode::NoScriptMatch:
        case ErrorCode::BackendUnavailable:
        case ErrorCode::MalformedOutput:
        case ErrorCode::ProviderError:
            return 3;
        case ErrorCode::InvariantViolation:
        case ErrorCode::DegenerateInput:
        case ErrorCode::UnknownDriver:
        case ErrorCode::PatchRejected:
            return 4;
    }
    return 1;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(ErrorCode::NotFound, "no file at " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(file, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] != '#') lines.push_back(line);
    }
    return lines;
}

valuation::SensitivityAxis parse_axis(const std::string& text) {
    auto eq = text.find('=');
    if (eq == std::string::npos)
        raise(ErrorCode::ConfigError, "axis must look like DRIVER=a,b,c, got \"" + text + "\"");
    valuation::SensitivityAxis axis;
    axis.driver = text.substr(0, eq);
    std::stringstream values(text.substr(eq + 1));
    std::string token;
    while (std::getline(values, token, ',')) axis.values.push_back(std::stod(token));
    return axis;
}

void print_valuation(const valuation::ValuationResult& v, const valuation::ValuationInputs& inputs) {
    std::cout << std::fixed << std::setprecision(2);
    std::cout << inputs.identity.name << " (" << inputs.identity.ticker << ")\n";
    std::cout << "  enterprise value:      " << v.enterprise_value << "\n";
    std::cout << "  equity value:          " << v.equity_value << "\n";
    std::cout << "  value per share:       " << v.value_per_share << " " << inputs.identity.listing_currency << "\n";
    std::cout << "  market price:          " << inputs.financials.market_price << "\n";
    std::cout << "  price / value:         " << std::setprecision(3) << v.price_to_value << "\n";
    std::cout << "  terminal EV/EBITDA:    " << (v.terminal_ev_to_ebitda > 0 ? std::to_string(v.terminal_ev_to_ebitda)
                                                                             : std::string("n/a")) << "\n";
}

valuation::ValuationInputs initialized_inputs(const std::string& ticker, const RunConfig& config,
                                              const std::string& as_of) {
    auto clock = as_of.empty() ? util::RunClock::system() : util::RunClock::at(as_of);
    auto snapshot = fundamentals::load_fundamentals(ticker, config.fixtures_source, as_of, clock);
    return orch::initialize_inputs(snapshot, config.macro);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dbot - value-driver DCF valuation with agentic refinement"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path = "dbot.toml";
    app.add_option("--config", config_path, "TOML-style config file")->capture_default_str();

    std::string ticker, as_of;
    auto* value_cmd = app.add_subcommand("value", "print the deterministic valuation for a ticker");
    value_cmd->fallthrough();
    value_cmd->add_option("ticker", ticker)->required();
    value_cmd->add_option("--as-of", as_of, "fixture date (default: latest)");

    auto* report_cmd = app.add_subcommand("report", "full pipeline: agents, report files, decision");
    report_cmd->fallthrough();
    report_cmd->add_option("ticker", ticker)->required();
    report_cmd->add_option("--as-of", as_of);

    std::string rows_text, cols_text;
    auto* sensitivity_cmd = app.add_subcommand("sensitivity", "re-value over a two-driver grid");
    sensitivity_cmd->fallthrough();
    sensitivity_cmd->add_option("ticker", ticker)->required();
    sensitivity_cmd->add_option("--rows", rows_text, "DRIVER=a,b,c")->required();
    sensitivity_cmd->add_option("--cols", cols_text, "DRIVER=x,y,z")->required();
    sensitivity_cmd->add_option("--as-of", as_of);

    int n_runs = 5;
    std::string mode_name = "none", paraphrase_dirs_text;
    auto* stability_cmd = app.add_subcommand("stability", "repeat the pipeline and measure dispersion");
    stability_cmd->fallthrough();
    stability_cmd->add_option("ticker", ticker)->required();
    stability_cmd->add_option("--n", n_runs)->capture_default_str();
    stability_cmd->add_option("--mode", mode_name, "none | paraphrase-templates | temperature")
        ->capture_default_str();
    stability_cmd->add_option("--paraphrase-dirs", paraphrase_dirs_text, "comma-separated template dirs");

    std::string dates_path;
    auto* backtest_cmd = app.add_subcommand("backtest", "one run per as-of date, clock pinned per date");
    backtest_cmd->fallthrough();
    backtest_cmd->add_option("ticker", ticker)->required();
    backtest_cmd->add_option("--dates", dates_path, "file with one ISO date per line")->required();

    std::string tickers_path;
    auto* batch_cmd = app.add_subcommand("batch", "run `report` per ticker concurrently");
    batch_cmd->fallthrough();
    batch_cmd->add_option("--tickers", tickers_path, "file with one ticker per line")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig config = RunConfig::from_file(config_path);

        if (value_cmd->parsed()) {
            auto inputs = initialized_inputs(ticker, config, as_of);
            print_valuation(valuation::value(inputs), inputs);
        } else if (report_cmd->parsed()) {
            auto record = orch::run_full_valuation(ticker, config, as_of);
            std::cout << "run " << record.run_id << " finished (" << record.termination_cause << ")\n";
            std::cout << "decision: " << store::decision_name(record.decision) << "\n";
            for (const auto& path : record.report_paths) std::cout << "  " << path << "\n";
        } else if (sensitivity_cmd->parsed()) {
            auto inputs = initialized_inputs(ticker, config, as_of);
            auto table = valuation::sensitivity_grid(inputs, parse_axis(rows_text), parse_axis(cols_text));
            std::cout << table.row_axis.driver << " \\ " << table.col_axis.driver;
            for (double c : table.col_axis.values) std::cout << "\t" << c;
            std::cout << "\n" << std::fixed << std::setprecision(2);
            for (std::size_t r = 0; r < table.cells.size(); ++r) {
                std::cout << std::defaultfloat << table.row_axis.values[r] << std::fixed;
                for (double cell : table.cells[r]) std::cout << "\t" << cell;
                std::cout << "\n";
            }
        } else if (stability_cmd->parsed()) {
            std::vector<std::string> dirs;
            std::stringstream stream(paraphrase_dirs_text);
            std::string dir;
            while (std::getline(stream, dir, ',')) dirs.push_back(dir);
            auto metrics = store::stability_report(ticker, n_runs, store::perturbation_mode_from_name(mode_name),
                                                   config, dirs);
            std::cout << std::fixed << std::setprecision(6);
            std::cout << "runs:       " << metrics.n_runs << "\n";
            std::cout << "mean value: " << metrics.value_mean << "\n";
            std::cout << "std:        " << metrics.value_std << "\n";
            std::cout << "dispersion: " << metrics.dispersion << "\n";
            std::cout << "flip rate:  " << metrics.decision_flip_rate << "\n";
            std::cout << "decisions: ";
            for (auto d : metrics.decisions) std::cout << " " << store::decision_name(d);
            std::cout << "\n";
        } else if (backtest_cmd->parsed()) {
            auto summary = store::backtest(ticker, read_lines(dates_path), config);
            std::cout << std::fixed << std::setprecision(2);
            std::cout << "date\tvalue\tprice\tdecision\n";
            for (const auto& row : summary.rows) {
                if (!row.skip_note.empty()) {
                    std::cout << row.as_of << "\t-\t-\t" << row.skip_note << "\n";
                    continue;
                }
                std::cout << row.as_of << "\t" << row.value_per_share << "\t" << row.market_price << "\t"
                          << store::decision_name(row.decision) << "\n";
            }
        } else if (batch_cmd->parsed()) {
            auto records = store::run_batch(read_lines(tickers_path), config);
            std::cout << "ticker\tvalue\tprice\tdecision\trun\n";
            std::cout << std::fixed << std::setprecision(2);
            for (const auto& record : records)
                std::cout << record.identity.ticker << "\t" << record.final_value.value_per_share << "\t"
                          << record.final_inputs.financials.market_price << "\t"
                          << store::decision_name(record.decision) << "\t" << record.run_id << "\n";
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
