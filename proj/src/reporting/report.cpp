#include "dbot/reporting/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "dbot/agents/agents.hpp"
#include "dbot/error.hpp"
#include "dbot/llm/schemas.hpp"

namespace fs = std::filesystem;

namespace dbot::reporting {

namespace {

const std::regex kRefToken(R"(\{\{(table|chart):([A-Za-z0-9_\-]+)\}\})");
const std::regex kTimestamp(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z?)");
const std::regex kIsoDate(R"(\d{4}-\d{2}-\d{2})");
const std::regex kNumberToken(R"(\$?\d+(?:,\d{3})*(?:\.\d+)?%?)");

bool boundary_ok(const std::string& text, std::size_t begin, std::size_t end) {
    if (begin > 0) {
        const char before = text[begin - 1];
        if (std::isalnum(static_cast<unsigned char>(before)) || before == '.' || before == ',' || before == '-')
            return false;
    }
    if (end < text.size()) {
        const char after = text[end];
        if (std::isalnum(static_cast<unsigned char>(after)) || after == '.') {
            // allow sentence-ending periods: ".<space>" or ".<eol>"
            if (after == '.' && (end + 1 == text.size() || !std::isdigit(static_cast<unsigned char>(text[end + 1]))))
                return true;
            return false;
        }
    }
    return true;
}

// Numeric tokens in prose: optional $, thousands groups, optional decimals,
// optional %. Dates/timestamps and reference tokens are stripped first, and
// bare 4-digit integers in 1900..2100 read as calendar years, not claims.
std::vector<NumericClaim> extract_claims(const std::string& body, const std::string& location) {
    std::string text = std::regex_replace(body, kRefToken, " ");
    text = std::regex_replace(text, kTimestamp, " ");
    text = std::regex_replace(text, kIsoDate, " ");

    std::vector<NumericClaim> claims;
    auto begin = std::sregex_iterator(text.begin(), text.end(), kNumberToken);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const auto& match = *it;
        const auto pos = static_cast<std::size_t>(match.position());
        if (!boundary_ok(text, pos, pos + match.str().size())) continue;
        NumericClaim claim;
        claim.token = match.str();
        claim.location = location;
        claim.percent = claim.token.back() == '%';
        std::string digits = claim.token;
        if (claim.percent) digits.pop_back();
        if (!digits.empty() && digits.front() == '$') digits.erase(digits.begin());
        digits.erase(std::remove(digits.begin(), digits.end(), ','), digits.end());
        if (digits.empty()) continue;
        claim.value = std::stod(digits);

        const bool plain_integer = !claim.percent && claim.token.front() != '$' &&
                                   digits.find('.') == std::string::npos;
        if (plain_integer && claim.value >= 1900 && claim.value <= 2100) continue;
        claims.push_back(std::move(claim));
    }
    return claims;
}

void collect_refs(const std::string& body, ReportSection& section) {
    auto begin = std::sregex_iterator(body.begin(), body.end(), kRefToken);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        if ((*it)[1] == "table") section.table_refs.push_back((*it)[2]);
        else section.chart_refs.push_back((*it)[2]);
    }
}

void collect_numbers(const nlohmann::json& node, std::vector<double>& out) {
    if (node.is_number()) {
        out.push_back(node.get<double>());
    } else if (node.is_array()) {
        for (const auto& child : node) collect_numbers(child, out);
    } else if (node.is_object()) {
        for (const auto& [key, child] : node.items()) collect_numbers(child, out);
    }
}

std::set<std::string> transcript_table_names(const std::vector<orch::TranscriptEntry>& transcript) {
    std::set<std::string> names;
    for (const auto& entry : transcript)
        for (const auto& [key, table] : entry.tables.items()) names.insert(key);
    return names;
}

const nlohmann::json* find_table(const std::vector<orch::TranscriptEntry>& transcript, const std::string& name) {
    const nlohmann::json* found = nullptr;
    for (const auto& entry : transcript)
        if (entry.tables.contains(name)) found = &entry.tables.at(name);
    return found;
}

std::string number_cell(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

std::string render_table_markdown(const std::string& name, const nlohmann::json& table) {
    std::ostringstream out;
    if (name == "sensitivity" && table.contains("cells")) {
        const auto& row_axis = table.at("row_axis");
        const auto& col_axis = table.at("col_axis");
        out << "| " << row_axis.at("driver").get<std::string>() << " \\ "
            << col_axis.at("driver").get<std::string>() << " |";
        for (const auto& v : col_axis.at("values")) out << " " << number_cell(v.get<double>()) << " |";
        out << "\n|";
        for (std::size_t i = 0; i <= col_axis.at("values").size(); ++i) out << " --- |";
        out << "\n";
        const auto& rows = table.at("cells");
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out << "| " << number_cell(row_axis.at("values")[r].get<double>()) << " |";
            for (const auto& cell : rows[r]) out << " " << number_cell(cell.get<double>()) << " |";
            out << "\n";
        }
        return out.str();
    }
    if (name == "comparables" && table.contains("peers")) {
        out << "| ticker | terminal EV/EBITDA |\n| --- | --- |\n";
        out << "| own | " << number_cell(table.at("own_terminal_ev_to_ebitda").get<double>()) << " |\n";
        for (const auto& peer : table.at("peers"))
            out << "| " << peer.at("ticker").get<std::string>() << " | "
                << number_cell(peer.at("ev_to_ebitda").get<double>()) << " |\n";
        return out.str();
    }
    out << "```json\n" << table.dump(2) << "\n```\n";
    return out.str();
}

nlohmann::json chart_to_json(const ChartSpec& chart) { return nlohmann::json(chart); }

} // namespace

const char* issue_category_name(IssueCategory category) {
    switch (category) {
        case IssueCategory::Length: return "length";
        case IssueCategory::UnverifiedNumber: return "unverified_number";
        case IssueCategory::MissingSource: return "missing_source";
        case IssueCategory::DanglingReference: return "dangling_reference";
    }
    return "unknown";
}

const char* chart_kind_name(ChartKind kind) {
    switch (kind) {
        case ChartKind::Line: return "line";
        case ChartKind::Bar: return "bar";
        case ChartKind::TableHeatmap: return "table-heatmap";
    }
    return "unknown";
}

ReportDraft parse_draft(const std::string& markdown) {
    ReportDraft draft;
    std::istringstream stream(markdown);
    std::string line;
    ReportSection current;
    bool in_section = false;

    auto flush = [&] {
        while (!current.body.empty() && current.body.back() == '\n') current.body.pop_back();
        if (!in_section && current.body.empty()) return;
        collect_refs(current.body, current);
        auto claims = extract_claims(current.body, current.heading.empty() ? "(preamble)" : current.heading);
        draft.numeric_claims.insert(draft.numeric_claims.end(), claims.begin(), claims.end());
        if (current.heading == "Sources") {
            std::istringstream body(current.body);
            std::string bullet;
            while (std::getline(body, bullet)) {
                if (bullet.rfind("- ", 0) == 0) draft.sources.push_back(bullet.substr(2));
            }
        }
        draft.sections.push_back(current);
        current = ReportSection{};
    };

    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (draft.title.empty() && line.rfind("# ", 0) == 0) {
            draft.title = line.substr(2);
            continue;
        }
        if (line.rfind("## ", 0) == 0) {
            flush();
            in_section = true;
            current.heading = line.substr(3);
            continue;
        }
        if (line.rfind("_Note: ", 0) == 0 && line.size() > 8 && line.back() == '_') {
            draft.notes.push_back(line.substr(7, line.size() - 8));
            continue;
        }
        if (!current.body.empty()) current.body += "\n";
        current.body += line;
    }
    flush();

    auto title_claims = extract_claims(draft.title, "(title)");
    draft.numeric_claims.insert(draft.numeric_claims.end(), title_claims.begin(), title_claims.end());
    return draft;
}

std::string draft_markdown(const ReportDraft& draft) {
    std::ostringstream out;
    out << "# " << draft.title << "\n";
    for (const auto& note : draft.notes) out << "_Note: " << note << "_\n";
    for (const auto& section : draft.sections) {
        out << "\n";
        if (!section.heading.empty()) out << "## " << section.heading << "\n\n";
        out << section.body << "\n";
    }
    return out.str();
}

int word_count(const ReportDraft& draft) {
    auto count = [](const std::string& text) {
        std::istringstream stream(text);
        std::string word;
        int n = 0;
        while (stream >> word) ++n;
        return n;
    };
    int total = count(draft.title);
    for (const auto& section : draft.sections) total += count(section.heading) + count(section.body);
    return total;
}

ReportDraft compose_report(const valuation::ValuationInputs& inputs, const valuation::ValuationResult& value,
                           const std::vector<orch::TranscriptEntry>& transcript,
                           const std::vector<ChartSpec>& charts, llm::Gateway& gateway, const RunConfig& config) {
    nlohmann::json chart_ids = nlohmann::json::array();
    for (const auto& chart : charts) chart_ids.push_back(chart.chart_id);
    nlohmann::json table_names = nlohmann::json::array();
    for (const auto& name : transcript_table_names(transcript)) table_names.push_back(name);

    nlohmann::json run_digest = nlohmann::json::array();
    for (const auto& entry : transcript)
        run_digest.push_back({{"round", entry.round},
                              {"route", entry.route},
                              {"action", entry.action},
                              {"value_per_share", entry.value.value_per_share}});

    auto envelope = gateway.render(
        "report_writer",
        {{"company_name", inputs.identity.name},
         {"ticker", inputs.identity.ticker},
         {"value_per_share", agents::format_money(value.value_per_share)},
         {"market_price", agents::format_money(inputs.financials.market_price)},
         {"min_words", std::to_string(config.report_min_words)},
         {"max_words", std::to_string(config.report_max_words)}},
        {nlohmann::json{{"drivers", inputs.drivers}, {"financials", inputs.financials}}.dump(),
         nlohmann::json(value).dump(), run_digest.dump(), chart_ids.dump(), table_names.dump()},
        config.report_temperature);

    const auto completion = gateway.complete("writer", envelope);
    ReportDraft draft = parse_draft(completion.text);
    if (draft.title.empty())
        raise(ErrorCode::MalformedOutput, "report writer produced no title heading");

    const bool has_comparables_chart = std::any_of(charts.begin(), charts.end(), [](const ChartSpec& c) {
        return c.chart_id == "comparables_ev_ebitda";
    });
    if (!has_comparables_chart) draft.notes.push_back("comparables chart omitted: no peer data in this run");
    return draft;
}

std::vector<double> build_whitelist(const valuation::ValuationInputs& inputs,
                                    const valuation::ValuationResult& value,
                                    const std::vector<orch::TranscriptEntry>& transcript,
                                    const std::vector<ChartSpec>& charts) {
    std::vector<double> whitelist;
    collect_numbers(nlohmann::json(inputs), whitelist);
    collect_numbers(nlohmann::json(value), whitelist);
    for (const auto& entry : transcript) {
        collect_numbers(entry.tables, whitelist);
        collect_numbers(nlohmann::json(entry.value), whitelist);
        if (entry.patch) collect_numbers(nlohmann::json(*entry.patch), whitelist);
    }
    for (const auto& chart : charts) collect_numbers(chart_to_json(chart), whitelist);
    std::sort(whitelist.begin(), whitelist.end());
    whitelist.erase(std::unique(whitelist.begin(), whitelist.end()), whitelist.end());
    return whitelist;
}

std::vector<Issue> verify_numbers(const ReportDraft& draft, const std::vector<double>& whitelist) {
    std::vector<Issue> issues;
    for (const auto& claim : draft.numeric_claims) {
        std::vector<double> candidates{claim.value};
        if (claim.percent) candidates.push_back(claim.value / 100.0);
        bool matched = false;
        for (double candidate : candidates) {
            for (double allowed : whitelist) {
                const double scale = std::fabs(allowed);
                if (scale < 1e-12 ? std::fabs(candidate) < 1e-12
                                  : std::fabs(candidate - allowed) <= 0.005 * scale) {
                    matched = true;
                    break;
                }
            }
            if (matched) break;
        }
        if (!matched)
            issues.push_back(Issue{IssueCategory::UnverifiedNumber,
                                   "\"" + claim.token + "\" in " + claim.location +
                                       " matches no computed value within 0.5%"});
    }
    return issues;
}

CritiqueResult critique(const ReportDraft& draft, const std::vector<double>& whitelist,
                        const std::vector<orch::TranscriptEntry>& transcript, const std::vector<ChartSpec>& charts,
                        llm::Gateway& gateway, const RunConfig& config) {
    CritiqueResult result;
    result.issues = verify_numbers(draft, whitelist);

    const int words = word_count(draft);
    if (words < config.report_min_words || words > config.report_max_words)
        result.issues.push_back(Issue{IssueCategory::Length,
                                      "word count " + std::to_string(words) + " outside [" +
                                          std::to_string(config.report_min_words) + ", " +
                                          std::to_string(config.report_max_words) + "]"});

    const auto table_names = transcript_table_names(transcript);
    std::set<std::string> chart_ids;
    for (const auto& chart : charts) chart_ids.insert(chart.chart_id);
    for (const auto& section : draft.sections) {
        for (const auto& ref : section.table_refs)
            if (!table_names.count(ref))
                result.issues.push_back(
                    Issue{IssueCategory::DanglingReference, "table ref \"" + ref + "\" resolves to nothing"});
        for (const auto& ref : section.chart_refs)
            if (!chart_ids.count(ref))
                result.issues.push_back(
                    Issue{IssueCategory::DanglingReference, "chart ref \"" + ref + "\" resolves to nothing"});
    }

    if (draft.sources.empty())
        result.issues.push_back(Issue{IssueCategory::MissingSource, "report lists no sources"});

    // LLM-judged issues are additive; a malformed critic never blocks the
    // deterministic verdict.
    try {
        auto envelope = gateway.render("report_critic",
                                       {{"min_words", std::to_string(config.report_min_words)},
                                        {"max_words", std::to_string(config.report_max_words)}},
                                       {draft_markdown(draft)});
        const auto completion = gateway.complete("critic", envelope);
        auto doc = llm::parse_structured(completion, "critique");
        for (const auto& issue : doc.at("issues")) {
            Issue out;
            const auto category = issue.at("category").get<std::string>();
            if (category == "length") out.category = IssueCategory::Length;
            else if (category == "unverified_number") out.category = IssueCategory::UnverifiedNumber;
            else if (category == "missing_source") out.category = IssueCategory::MissingSource;
            else out.category = IssueCategory::DanglingReference;
            out.detail = issue.at("detail").get<std::string>();
            result.issues.push_back(std::move(out));
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedOutput && e.code() != ErrorCode::SchemaViolation) throw;
    }

    result.pass = result.issues.empty();
    return result;
}

ReportDraft revise(const ReportDraft& draft, const CritiqueResult& critique_result, llm::Gateway& gateway,
                   const RunConfig& config) {
    auto envelope = gateway.render("report_revise", {{"issue_count", std::to_string(critique_result.issues.size())}},
                                   {draft_markdown(draft), nlohmann::json(critique_result).dump()},
                                   config.report_temperature);
    const auto completion = gateway.complete("writer", envelope);
    ReportDraft revised = parse_draft(completion.text);
    if (revised.title.empty()) raise(ErrorCode::MalformedOutput, "revised report has no title heading");
    revised.notes = draft.notes;
    return revised;
}

ReportResult write_report(const valuation::ValuationInputs& inputs, const valuation::ValuationResult& value,
                          const std::vector<orch::TranscriptEntry>& transcript,
                          const std::vector<ChartSpec>& charts, llm::Gateway& gateway, const RunConfig& config) {
    ReportResult result;
    result.draft = compose_report(inputs, value, transcript, charts, gateway, config);
    const auto whitelist = build_whitelist(inputs, value, transcript, charts);
    result.critique = critique(result.draft, whitelist, transcript, charts, gateway, config);

    while (!result.critique.pass && result.revisions < config.report_max_revisions) {
        result.draft = revise(result.draft, result.critique, gateway, config);
        ++result.revisions;
        result.critique = critique(result.draft, whitelist, transcript, charts, gateway, config);
    }

    if (!result.critique.pass) {
        ReportSection annex;
        annex.heading = "Unresolved issues";
        for (const auto& issue : result.critique.issues) {
            annex.body += "- ";
            annex.body += issue_category_name(issue.category);
            annex.body += ": ";
            annex.body += issue.detail;
            annex.body += "\n";
        }
        result.draft.sections.push_back(std::move(annex));
        result.annexed = true;
    }
    return result;
}

std::vector<ChartSpec> make_charts(const valuation::ValuationInputs& inputs,
                                   const std::vector<orch::TranscriptEntry>& transcript) {
    std::vector<ChartSpec> charts;

    const auto result = valuation::value(inputs);
    ChartSpec projection;
    projection.chart_id = "fcff_projection";
    projection.kind = ChartKind::Line;
    projection.caption = "Revenue and free cash flow to the firm over the explicit horizon";
    ChartSeries revenue{"revenue", {}, "forecast year", inputs.identity.listing_currency};
    ChartSeries fcff{"fcff", {}, "forecast year", inputs.identity.listing_currency};
    for (const auto& row : result.table.rows) {
        revenue.values.push_back(row.revenue);
        fcff.values.push_back(row.fcff);
    }
    projection.series = {revenue, fcff};
    charts.push_back(std::move(projection));

    if (const auto* table = find_table(transcript, "sensitivity")) {
        ChartSpec heatmap;
        heatmap.chart_id = "sensitivity_heatmap";
        heatmap.kind = ChartKind::TableHeatmap;
        heatmap.caption = "Value per share across " + table->at("row_axis").at("driver").get<std::string>() +
                          " and " + table->at("col_axis").at("driver").get<std::string>();
        const auto& rows = table->at("cells");
        const auto& row_values = table->at("row_axis").at("values");
        for (std::size_t r = 0; r < rows.size(); ++r) {
            ChartSeries series;
            series.name = table->at("row_axis").at("driver").get<std::string>() + "=" +
                          number_cell(row_values[r].get<double>());
            series.axis_label = table->at("col_axis").at("driver").get<std::string>();
            for (const auto& cell : rows[r]) series.values.push_back(cell.get<double>());
            heatmap.series.push_back(std::move(series));
        }
        charts.push_back(std::move(heatmap));
    }

    if (const auto* table = find_table(transcript, "comparables")) {
        ChartSpec bars;
        bars.chart_id = "comparables_ev_ebitda";
        bars.kind = ChartKind::Bar;
        bars.caption = "Terminal EV/EBITDA against peers";
        ChartSeries own{"own", {table->at("own_terminal_ev_to_ebitda").get<double>()}, "company", "x"};
        bars.series.push_back(std::move(own));
        for (const auto& peer : table->at("peers")) {
            ChartSeries series{peer.at("ticker").get<std::string>(), {peer.at("ev_to_ebitda").get<double>()},
                               "company", "x"};
            bars.series.push_back(std::move(series));
        }
        charts.push_back(std::move(bars));
    }

    // every emitted spec must satisfy the registered chart-spec schema
    for (const auto& chart : charts) {
        llm::Completion synthetic;
        synthetic.text = chart_to_json(chart).dump();
        llm::parse_structured(synthetic, "chart-spec");
    }
    return charts;
}

std::vector<std::string> render_report(const ReportDraft& draft, const std::vector<ChartSpec>& charts,
                                       const std::vector<orch::TranscriptEntry>& transcript,
                                       const std::string& out_dir, const std::string& run_id) {
    const fs::path base = fs::path(out_dir) / run_id;
    fs::create_directories(base / "charts");

    std::string markdown = draft_markdown(draft);
    // resolve chart refs to sidecar files and inline table refs
    std::string resolved;
    std::size_t last = 0;
    auto begin = std::sregex_iterator(markdown.begin(), markdown.end(), kRefToken);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const auto& match = *it;
        resolved += markdown.substr(last, static_cast<std::size_t>(match.position()) - last);
        const std::string kind = match[1];
        const std::string name = match[2];
        if (kind == "chart") {
            resolved += "[chart: " + name + "](charts/" + name + ".json)";
        } else if (const auto* table = find_table(transcript, name)) {
            resolved += "\n" + render_table_markdown(name, *table);
        } else {
            resolved += "[missing table: " + name + "]";
        }
        last = static_cast<std::size_t>(match.position()) + match.str().size();
    }
    resolved += markdown.substr(last);

    std::vector<std::string> paths;
    const fs::path report_path = base / "report.md";
    std::ofstream(report_path) << resolved;
    paths.push_back(report_path.string());

    nlohmann::json manifest;
    manifest["run_id"] = run_id;
    manifest["title"] = draft.title;
    manifest["report"] = "report.md";
    manifest["word_count"] = word_count(draft);
    manifest["notes"] = draft.notes;
    manifest["sources"] = draft.sources;
    nlohmann::json chart_index = nlohmann::json::object();
    for (const auto& chart : charts) {
        const std::string relative = "charts/" + chart.chart_id + ".json";
        const fs::path chart_path = base / relative;
        std::ofstream(chart_path) << chart_to_json(chart).dump(2) << "\n";
        chart_index[chart.chart_id] = relative;
        paths.push_back(chart_path.string());
    }
    manifest["charts"] = chart_index;

    const fs::path manifest_path = base / "manifest.json";
    std::ofstream(manifest_path) << manifest.dump(2) << "\n";
    paths.insert(paths.begin() + 1, manifest_path.string());
    return paths;
}

void to_json(nlohmann::json& j, const ChartSeries& v) {
    j = nlohmann::json{{"name", v.name}, {"values", v.values}, {"axis_label", v.axis_label}, {"unit", v.unit}};
}

void from_json(const nlohmann::json& j, ChartSeries& v) {
    j.at("name").get_to(v.name);
    j.at("values").get_to(v.values);
    v.axis_label = j.value("axis_label", "");
    v.unit = j.value("unit", "");
}

void to_json(nlohmann::json& j, const ChartSpec& v) {
    j = nlohmann::json{{"chart_id", v.chart_id},
                       {"kind", chart_kind_name(v.kind)},
                       {"series", v.series},
                       {"caption", v.caption}};
}

void from_json(const nlohmann::json& j, ChartSpec& v) {
    j.at("chart_id").get_to(v.chart_id);
    const auto kind = j.at("kind").get<std::string>();
    v.kind = kind == "bar" ? ChartKind::Bar : kind == "table-heatmap" ? ChartKind::TableHeatmap : ChartKind::Line;
    j.at("series").get_to(v.series);
    v.caption = j.value("caption", "");
}

void to_json(nlohmann::json& j, const Issue& v) {
    j = nlohmann::json{{"category", issue_category_name(v.category)}, {"detail", v.detail}};
}

void from_json(const nlohmann::json& j, Issue& v) {
    const auto category = j.at("category").get<std::string>();
    if (category == "length") v.category = IssueCategory::Length;
    else if (category == "unverified_number") v.category = IssueCategory::UnverifiedNumber;
    else if (category == "missing_source") v.category = IssueCategory::MissingSource;
    else v.category = IssueCategory::DanglingReference;
    j.at("detail").get_to(v.detail);
}

void to_json(nlohmann::json& j, const CritiqueResult& v) {
    j = nlohmann::json{{"issues", v.issues}, {"verdict", v.pass ? "pass" : "fail"}};
}

void from_json(const nlohmann::json& j, CritiqueResult& v) {
    j.at("issues").get_to(v.issues);
    v.pass = j.at("verdict").get<std::string>() == "pass";
}

} // namespace dbot::reporting
