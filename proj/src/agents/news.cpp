#include "dbot/agents/news.hpp"

#include <algorithm>
#include <set>

#include "dbot/error.hpp"
#include "dbot/fundamentals/providers.hpp"
#include "dbot/llm/schemas.hpp"

namespace dbot::agents {

namespace {

nlohmann::json item_at_phase(const NewsItem& item, NewsPhase phase) {
    nlohmann::json view = {{"headline", item.headline},
                           {"source", item.source_name},
                           {"published_at", item.published_at}};
    if (phase == NewsPhase::Lede || phase == NewsPhase::Full) view["first_paragraph"] = item.first_paragraph;
    if (phase == NewsPhase::Full) view["full_text"] = item.full_text;
    return view;
}

// Single-attempt relevance score; malformed output drops the item upstream.
std::optional<double> score_item(AgentContext& ctx, const NewsItem& item, NewsPhase phase,
                                 std::vector<std::string>& warnings) {
    const char* template_id = phase == NewsPhase::Headline ? "news_relevance_headline" : "news_relevance_lede";
    auto envelope = ctx.gateway.render(template_id, {{"phase", news_phase_name(phase)}},
                                       {item_at_phase(item, phase).dump()});
    const auto completion = ctx.gateway.complete("news", envelope);
    try {
        auto doc = llm::parse_structured(completion, "news-relevance");
        return doc.at("relevance").get<double>();
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedOutput && e.code() != ErrorCode::SchemaViolation) throw;
        warnings.push_back("dropped item \"" + item.headline + "\" at " + news_phase_name(phase) +
                           " phase: " + e.detail());
        return std::nullopt;
    }
}

} // namespace

const char* news_phase_name(NewsPhase phase) {
    switch (phase) {
        case NewsPhase::Headline: return "headline";
        case NewsPhase::Lede: return "lede";
        case NewsPhase::Full: return "full";
    }
    return "unknown";
}

const char* direction_name(Direction direction) {
    switch (direction) {
        case Direction::Up: return "up";
        case Direction::Down: return "down";
        case Direction::Unchanged: return "unchanged";
    }
    return "unknown";
}

std::pair<std::vector<NewsItem>, std::vector<std::string>> merge_news(const std::vector<SourceBatch>& batches,
                                                                      const std::string& cutoff_date) {
    std::vector<NewsItem> merged;
    std::vector<std::string> warnings;
    for (const auto& batch : batches) {
        if (batch.error) {
            warnings.push_back("news source " + batch.source_name + " failed: " + *batch.error);
            continue;
        }
        for (const auto& item : batch.items) {
            if (item.headline.empty() || item.published_at.empty()) {
                warnings.push_back("skipped malformed item from " + batch.source_name);
                continue;
            }
            if (!cutoff_date.empty() && util::date_of_timestamp(item.published_at) > cutoff_date) {
                warnings.push_back("excluded post-dated item \"" + item.headline + "\" published " +
                                   item.published_at + " after " + cutoff_date);
                continue;
            }
            merged.push_back(item);
        }
    }
    std::stable_sort(merged.begin(), merged.end(), [](const NewsItem& a, const NewsItem& b) {
        if (a.published_at != b.published_at) return a.published_at > b.published_at;
        return a.source_name < b.source_name;
    });
    std::set<std::string> seen;
    std::vector<NewsItem> deduped;
    for (auto& item : merged) {
        if (!item.url.empty() && !seen.insert(item.url).second) continue;
        deduped.push_back(std::move(item));
    }
    return {std::move(deduped), std::move(warnings)};
}

std::pair<std::vector<NewsItem>, std::vector<std::string>> fetch_news(const std::string& ticker,
                                                                      const std::string& source,
                                                                      const std::string& as_of,
                                                                      const util::RunClock& clock) {
    auto provider = fundamentals::make_provider(source);
    std::vector<SourceBatch> batches;
    try {
        auto doc = provider->get_document(ticker, fundamentals::DocumentKind::News, as_of);
        const auto& items_doc = doc.is_array() ? doc : doc.at("items");
        SourceBatch batch;
        batch.source_name = "fixture";
        batch.items = items_doc.get<std::vector<NewsItem>>();
        batches.push_back(std::move(batch));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NotFound) throw;
        batches.push_back(SourceBatch{"fixture", {}, "no news document for " + ticker + " at " + as_of});
    }
    // cap at the run clock so nothing after the injected date leaks in
    const std::string cutoff = std::min(as_of, clock.today);
    return merge_news(batches, cutoff);
}

NewsDigest triage_news(const std::vector<NewsItem>& items, AgentContext& ctx) {
    NewsDigest digest;
    if (items.empty()) return digest;

    // headline phase over everything, in merge order
    for (const auto& item : items) {
        auto score = score_item(ctx, item, NewsPhase::Headline, digest.warnings);
        if (!score) continue;
        digest.items.push_back(TriagedItem{item, NewsPhase::Headline, *score});
    }
    // lede phase for items past theta1
    for (auto& triaged : digest.items) {
        if (triaged.relevance < ctx.news_theta1) continue;
        auto score = score_item(ctx, triaged.item, NewsPhase::Lede, digest.warnings);
        if (!score) continue;
        triaged.phase_reached = NewsPhase::Lede;
        triaged.relevance = *score;
    }
    // full text only past theta2, and only for items that actually reached the lede
    for (auto& triaged : digest.items) {
        if (triaged.phase_reached != NewsPhase::Lede || triaged.relevance < ctx.news_theta2) continue;
        triaged.phase_reached = NewsPhase::Full;
        ++digest.full_text_fetches;
    }

    nlohmann::json surviving = nlohmann::json::array();
    for (const auto& triaged : digest.items) {
        if (triaged.phase_reached == NewsPhase::Headline) continue;
        auto view = item_at_phase(triaged.item, triaged.phase_reached);
        view["relevance"] = triaged.relevance;
        surviving.push_back(view);
    }
    if (surviving.empty()) return digest;

    auto envelope = ctx.gateway.render("news_digest", {{"item_count", std::to_string(surviving.size())}},
                                       {surviving.dump()});
    auto doc = llm::complete_structured(ctx.gateway, "news", envelope, "news-digest");
    digest.summary = doc.at("summary").get<std::string>();
    for (const auto& implication : doc.at("driver_implications")) {
        DriverImplication out;
        implication.at("driver_path").get_to(out.driver_path);
        const auto direction = implication.at("direction").get<std::string>();
        out.direction = direction == "up" ? Direction::Up
                        : direction == "down" ? Direction::Down
                                              : Direction::Unchanged;
        implication.at("rationale").get_to(out.rationale);
        digest.driver_implications.push_back(std::move(out));
    }
    return digest;
}

AgentOutcome apply_news(valuation::ValuationInputs& inputs, const NewsDigest& digest, AgentContext& ctx,
                        const std::string& patch_id) {
    AgentOutcome outcome;
    outcome.route = "news";
    if (digest.driver_implications.empty()) {
        outcome.action = "applied";
        outcome.note = digest.summary.empty() ? "no relevant news" : "news digest carries no driver implications";
        InputPatch empty;
        empty.patch_id = patch_id;
        empty.source_agent = SourceAgent::News;
        empty.rationale = outcome.note;
        apply_patch(inputs, empty, ctx.guardrails);
        outcome.patch = std::move(empty);
        outcome.tables["news_digest"] = digest;
        return outcome;
    }

    auto envelope = ctx.gateway.render("news_apply", {{"company_name", inputs.identity.name}},
                                       {nlohmann::json(digest).dump(),
                                        nlohmann::json{{"drivers", inputs.drivers}}.dump()});
    auto doc = llm::complete_structured(ctx.gateway, "news", envelope, "input-patch");

    try {
        InputPatch patch = patch_from_json(doc, SourceAgent::News, patch_id, inputs);
        try {
            apply_patch(inputs, patch, ctx.guardrails);
            outcome.action = "applied";
            outcome.note = patch.rationale;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PatchRejected) throw;
            outcome.action = "rejected";
            outcome.note = e.detail();
        }
        outcome.patch = std::move(patch);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::PatchRejected) throw;
        outcome.action = "rejected";
        outcome.note = e.detail();
    }
    outcome.tables["news_digest"] = digest;
    return outcome;
}

void to_json(nlohmann::json& j, const NewsImage& v) { j = nlohmann::json{{"url", v.url}, {"caption", v.caption}}; }

void from_json(const nlohmann::json& j, NewsImage& v) {
    j.at("url").get_to(v.url);
    v.caption = j.value("caption", "");
}

void to_json(nlohmann::json& j, const NewsItem& v) {
    j = nlohmann::json{{"headline", v.headline},
                       {"first_paragraph", v.first_paragraph},
                       {"full_text", v.full_text},
                       {"source_name", v.source_name},
                       {"url", v.url},
                       {"published_at", v.published_at},
                       {"image_refs", v.image_refs}};
}

void from_json(const nlohmann::json& j, NewsItem& v) {
    j.at("headline").get_to(v.headline);
    v.first_paragraph = j.value("first_paragraph", "");
    v.full_text = j.value("full_text", "");
    v.source_name = j.value("source_name", "");
    v.url = j.value("url", "");
    j.at("published_at").get_to(v.published_at);
    if (j.contains("image_refs")) j.at("image_refs").get_to(v.image_refs);
    else v.image_refs.clear();
}

void to_json(nlohmann::json& j, const DriverImplication& v) {
    j = nlohmann::json{{"driver_path", v.driver_path},
                       {"direction", direction_name(v.direction)},
                       {"rationale", v.rationale}};
}

void from_json(const nlohmann::json& j, DriverImplication& v) {
    j.at("driver_path").get_to(v.driver_path);
    const auto direction = j.at("direction").get<std::string>();
    v.direction = direction == "up" ? Direction::Up : direction == "down" ? Direction::Down : Direction::Unchanged;
    j.at("rationale").get_to(v.rationale);
}

void to_json(nlohmann::json& j, const TriagedItem& v) {
    j = nlohmann::json{{"item", v.item},
                       {"phase_reached", news_phase_name(v.phase_reached)},
                       {"relevance", v.relevance}};
}

void from_json(const nlohmann::json& j, TriagedItem& v) {
    j.at("item").get_to(v.item);
    const auto phase = j.at("phase_reached").get<std::string>();
    v.phase_reached = phase == "full" ? NewsPhase::Full : phase == "lede" ? NewsPhase::Lede : NewsPhase::Headline;
    j.at("relevance").get_to(v.relevance);
}

void to_json(nlohmann::json& j, const NewsDigest& v) {
    j = nlohmann::json{{"items", v.items},
                       {"summary", v.summary},
                       {"driver_implications", v.driver_implications},
                       {"full_text_fetches", v.full_text_fetches},
                       {"warnings", v.warnings}};
}

void from_json(const nlohmann::json& j, NewsDigest& v) {
    j.at("items").get_to(v.items);
    j.at("summary").get_to(v.summary);
    j.at("driver_implications").get_to(v.driver_implications);
    j.at("full_text_fetches").get_to(v.full_text_fetches);
    j.at("warnings").get_to(v.warnings);
}

} // namespace dbot::agents
