#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbot/config.hpp"
#include "dbot/llm/gateway.hpp"
#include "dbot/orchestrator/run.hpp"
#include "dbot/valuation/types.hpp"

namespace dbot::reporting {

// The writer has read access only: everything here takes const views of the
// inputs and valuation, and there is no patch channel out of this module.

struct ReportSection {
    std::string heading;
    std::string body;
    std::vector<std::string> table_refs;
    std::vector<std::string> chart_refs;
};

struct NumericClaim {
    double value = 0.0;
    bool percent = false;
    std::string token;    // as written, e.g. "$420" or "4.4%"
    std::string location; // section heading
};

struct ReportDraft {
    std::string title;
    std::vector<ReportSection> sections;
    std::vector<NumericClaim> numeric_claims;
    std::vector<std::string> sources;
    std::vector<std::string> notes; // pipeline annotations, e.g. omitted charts
};

enum class IssueCategory { Length, UnverifiedNumber, MissingSource, DanglingReference };
const char* issue_category_name(IssueCategory category);

struct Issue {
    IssueCategory category = IssueCategory::Length;
    std::string detail;
};

struct CritiqueResult {
    std::vector<Issue> issues;
    bool pass = false; // pass iff issues empty
};

enum class ChartKind { Line, Bar, TableHeatmap };
const char* chart_kind_name(ChartKind kind);

struct ChartSeries {
    std::string name;
    std::vector<double> values;
    std::string axis_label;
    std::string unit;
};

struct ChartSpec {
    std::string chart_id;
    ChartKind kind = ChartKind::Line;
    std::vector<ChartSeries> series;
    std::string caption;
};

// Markdown structure: "# title", "## section" headings, reference tokens
// {{table:<name>}} / {{chart:<id>}}, and a "## Sources" section whose bullet
// lines become the citation list.
ReportDraft parse_draft(const std::string& markdown);
std::string draft_markdown(const ReportDraft& draft);
int word_count(const ReportDraft& draft);

// Writer call: one completion rendered from the report_writer template over
// the run artifacts; the completion is parsed structurally.
ReportDraft compose_report(const valuation::ValuationInputs& inputs, const valuation::ValuationResult& value,
                           const std::vector<orch::TranscriptEntry>& transcript,
                           const std::vector<ChartSpec>& charts, llm::Gateway& gateway, const RunConfig& config);

// Every numeric value reachable from the run artifacts; the draft may only
// state numbers that appear here (0.5% prose-rounding allowance).
std::vector<double> build_whitelist(const valuation::ValuationInputs& inputs,
                                    const valuation::ValuationResult& value,
                                    const std::vector<orch::TranscriptEntry>& transcript,
                                    const std::vector<ChartSpec>& charts);

std::vector<Issue> verify_numbers(const ReportDraft& draft, const std::vector<double>& whitelist);

// Deterministic issues (numbers, length, dangling references, missing
// sources) merged with LLM-judged ones; the deterministic set always counts,
// and a malformed critic completion degrades to deterministic-only.
CritiqueResult critique(const ReportDraft& draft, const std::vector<double>& whitelist,
                        const std::vector<orch::TranscriptEntry>& transcript, const std::vector<ChartSpec>& charts,
                        llm::Gateway& gateway, const RunConfig& config);

// One writer re-prompt with the critique attached.
ReportDraft revise(const ReportDraft& draft, const CritiqueResult& critique_result, llm::Gateway& gateway,
                   const RunConfig& config);

struct ReportResult {
    ReportDraft draft;
    CritiqueResult critique;
    int revisions = 0;
    bool annexed = false; // still failing after the revision bound; published with an annex
};

// writer -> critic -> revise, bounded at config.report_max_revisions; a draft
// still failing afterwards is published with an "Unresolved issues" annex.
ReportResult write_report(const valuation::ValuationInputs& inputs, const valuation::ValuationResult& value,
                          const std::vector<orch::TranscriptEntry>& transcript,
                          const std::vector<ChartSpec>& charts, llm::Gateway& gateway, const RunConfig& config);

// Declarative chart specs straight from validated tables: revenue/FCFF
// projection, sensitivity heatmap, comparables bars (omitted when there are
// no peers, which is noted on the draft by the caller via chart absence).
std::vector<ChartSpec> make_charts(const valuation::ValuationInputs& inputs,
                                   const std::vector<orch::TranscriptEntry>& transcript);

// Writes report.md, charts/<id>.json, and manifest.json under
// <out_dir>/<run_id>/. Byte-stable for equal inputs. Returns written paths,
// report first.
std::vector<std::string> render_report(const ReportDraft& draft, const std::vector<ChartSpec>& charts,
                                       const std::vector<orch::TranscriptEntry>& transcript,
                                       const std::string& out_dir, const std::string& run_id);

void to_json(nlohmann::json& j, const ChartSeries& v);
void from_json(const nlohmann::json& j, ChartSeries& v);
void to_json(nlohmann::json& j, const ChartSpec& v);
void from_json(const nlohmann::json& j, ChartSpec& v);
void to_json(nlohmann::json& j, const Issue& v);
void from_json(const nlohmann::json& j, Issue& v);
void to_json(nlohmann::json& j, const CritiqueResult& v);
void from_json(const nlohmann::json& j, CritiqueResult& v);

} // namespace dbot::reporting
