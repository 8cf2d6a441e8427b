#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbot/agents/agents.hpp"
#include "dbot/util/dates.hpp"

namespace dbot::agents {

struct NewsImage {
    std::string url;
    std::string caption;
};

struct NewsItem {
    std::string headline;
    std::string first_paragraph;
    std::string full_text; // lazily read: only counted as fetched past the lede gate
    std::string source_name;
    std::string url;
    std::string published_at; // ISO-8601 timestamp
    std::vector<NewsImage> image_refs;
};

enum class NewsPhase { Headline, Lede, Full };
const char* news_phase_name(NewsPhase phase);

enum class Direction { Up, Down, Unchanged };
const char* direction_name(Direction direction);

struct DriverImplication {
    std::string driver_path;
    Direction direction = Direction::Unchanged;
    std::string rationale;
};

struct TriagedItem {
    NewsItem item;
    NewsPhase phase_reached = NewsPhase::Headline;
    double relevance = 0.0;
};

struct NewsDigest {
    std::vector<TriagedItem> items;
    std::string summary;
    std::vector<DriverImplication> driver_implications;
    int full_text_fetches = 0;
    std::vector<std::string> warnings;
};

struct SourceBatch {
    std::string source_name;
    std::vector<NewsItem> items;
    std::optional<std::string> error; // a failed source contributes a warning, not a run failure
};

// Deterministic merge across sources: sort by (published_at desc, source_name
// asc), drop duplicate urls keeping the first by that order, and exclude
// anything published after the cutoff date (no look-ahead).
std::pair<std::vector<NewsItem>, std::vector<std::string>> merge_news(const std::vector<SourceBatch>& batches,
                                                                      const std::string& cutoff_date);

// Loads the news fixture document for (ticker, as_of) and merges it under the
// run clock cutoff. Missing document -> empty list with a warning.
std::pair<std::vector<NewsItem>, std::vector<std::string>> fetch_news(const std::string& ticker,
                                                                      const std::string& source,
                                                                      const std::string& as_of,
                                                                      const util::RunClock& clock);

// Three-phase task-based triage: every item is scored at the headline, items
// at or above theta1 proceed to the lede, items at or above theta2 get their
// full text fetched and read. Items whose relevance score comes back
// malformed are dropped with a warning. Digest synthesis runs once over the
// surviving items.
NewsDigest triage_news(const std::vector<NewsItem>& items, AgentContext& ctx);

// Converts the digest's driver implications into bounded numeric changes via
// one LLM call; same guardrails as every other patch.
AgentOutcome apply_news(valuation::ValuationInputs& inputs, const NewsDigest& digest, AgentContext& ctx,
                        const std::string& patch_id);

void to_json(nlohmann::json& j, const NewsImage& v);
void from_json(const nlohmann::json& j, NewsImage& v);
void to_json(nlohmann::json& j, const NewsItem& v);
void from_json(const nlohmann::json& j, NewsItem& v);
void to_json(nlohmann::json& j, const DriverImplication& v);
void from_json(const nlohmann::json& j, DriverImplication& v);
void to_json(nlohmann::json& j, const TriagedItem& v);
void from_json(const nlohmann::json& j, TriagedItem& v);
void to_json(nlohmann::json& j, const NewsDigest& v);
void from_json(const nlohmann::json& j, NewsDigest& v);

} // namespace dbot::agents
