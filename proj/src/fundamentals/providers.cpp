#include "dbot/fundamentals/providers.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>

#include "dbot/error.hpp"

namespace fs = std::filesystem;

namespace dbot::fundamentals {

namespace {

std::mutex registry_mutex;
std::map<std::string, std::shared_ptr<DataProvider> (*)(const std::string&)>& registry() {
    static std::map<std::string, std::shared_ptr<DataProvider> (*)(const std::string&)> map;
    return map;
}

std::string sibling_suffix(DocumentKind kind) {
    switch (kind) {
        case DocumentKind::Fundamentals: return ".json";
        case DocumentKind::Consensus: return ".consensus.json";
        case DocumentKind::Comparables: return ".comparables.json";
        case DocumentKind::News: return ".news.json";
    }
    return ".json";
}

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream file(path);
    if (!file) raise(ErrorCode::NotFound, "no document at " + path.string());
    nlohmann::json doc;
    try {
        file >> doc;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::SchemaViolation, "malformed JSON in " + path.string() + ": " + e.what());
    }
    return doc;
}

template <typename T>
T parse_document(const nlohmann::json& doc, const std::string& what) {
    try {
        return doc.get<T>();
    } catch (const Error&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::SchemaViolation, what + ": " + e.what());
    }
}

std::string resolve_as_of(DataProvider& provider, const std::string& ticker, const std::string& as_of,
                          const util::RunClock& clock) {
    if (!as_of.empty()) return util::require_iso_date(as_of, "as_of");
    return provider.latest_as_of(ticker, clock.today);
}

} // namespace

const char* document_kind_name(DocumentKind kind) {
    switch (kind) {
        case DocumentKind::Fundamentals: return "fundamentals";
        case DocumentKind::Consensus: return "consensus";
        case DocumentKind::Comparables: return "comparables";
        case DocumentKind::News: return "news";
    }
    return "unknown";
}

FixtureProvider::FixtureProvider(std::string root) : root_(std::move(root)) {}

nlohmann::json FixtureProvider::get_document(const std::string& ticker, DocumentKind kind,
                                             const std::string& as_of) {
    const fs::path path = fs::path(root_) / ticker / (as_of + sibling_suffix(kind));
    if (!fs::exists(path))
        raise(ErrorCode::NotFound, std::string(document_kind_name(kind)) + " document for " + ticker + " at " +
                                       as_of + " (looked in " + path.string() + ")");
    return read_json_file(path);
}

std::string FixtureProvider::latest_as_of(const std::string& ticker, const std::string& run_clock_today) {
    const fs::path dir = fs::path(root_) / ticker;
    if (!fs::is_directory(dir)) raise(ErrorCode::NotFound, "no fixtures for ticker " + ticker + " under " + root_);
    std::string best;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        // fundamentals documents only: "<date>.json" with no sibling suffix
        if (name.size() != 15 || name.substr(10) != ".json") continue;
        const std::string date = name.substr(0, 10);
        if (!util::is_iso_date(date)) continue;
        if (date > run_clock_today) continue;
        if (date > best) best = date;
    }
    if (best.empty())
        raise(ErrorCode::NotFound, "no fundamentals fixture for " + ticker + " dated on or before " + run_clock_today);
    return best;
}

std::shared_ptr<DataProvider> make_provider(const std::string& source) {
    const auto colon = source.find(':');
    const std::string scheme = colon == std::string::npos ? source : source.substr(0, colon);
    const std::string rest = colon == std::string::npos ? std::string() : source.substr(colon + 1);
    if (scheme == "fixture") {
        if (rest.empty()) raise(ErrorCode::ConfigError, "fixture source needs a path, e.g. fixture:fixtures");
        return std::make_shared<FixtureProvider>(rest);
    }
    std::lock_guard<std::mutex> lock(registry_mutex);
    auto it = registry().find(scheme);
    if (it == registry().end())
        raise(ErrorCode::ConfigError, "no provider registered for scheme \"" + scheme + "\"");
    return it->second(rest);
}

void register_provider(const std::string& scheme,
                       std::shared_ptr<DataProvider> (*factory)(const std::string&)) {
    std::lock_guard<std::mutex> lock(registry_mutex);
    registry()[scheme] = factory;
}

FundamentalsSnapshot load_fundamentals(const std::string& ticker, const std::string& source,
                                       const std::string& as_of, const util::RunClock& clock) {
    auto provider = make_provider(source);
    const std::string date = resolve_as_of(*provider, ticker, as_of, clock);
    auto doc = provider->get_document(ticker, DocumentKind::Fundamentals, date);
    auto snapshot = parse_document<FundamentalsSnapshot>(doc, "fundamentals document for " + ticker);
    if (snapshot.identity.ticker != ticker)
        raise(ErrorCode::SchemaViolation,
              "fundamentals document ticker " + snapshot.identity.ticker + " does not match requested " + ticker);
    validate_snapshot(snapshot, clock.today);
    return snapshot;
}

ConsensusEstimates fetch_consensus(const std::string& ticker, const std::string& source, const std::string& as_of,
                                   const util::RunClock& clock) {
    auto provider = make_provider(source);
    const std::string date = resolve_as_of(*provider, ticker, as_of, clock);
    auto doc = provider->get_document(ticker, DocumentKind::Consensus, date);
    if (doc.is_null() || (doc.is_object() && doc.empty()))
        raise(ErrorCode::NotFound, "consensus document for " + ticker + " at " + date + " is empty");
    auto consensus = parse_document<ConsensusEstimates>(doc, "consensus document for " + ticker);
    auto failures = check_consensus(consensus);
    if (!failures.empty())
        raise(ErrorCode::SchemaViolation, "consensus document for " + ticker + ": " + failures.front());
    return consensus;
}

ComparablesSet fetch_comparables(const std::string& ticker, const std::string& source, const std::string& as_of,
                                 const util::RunClock& clock) {
    auto provider = make_provider(source);
    const std::string date = resolve_as_of(*provider, ticker, as_of, clock);
    auto doc = provider->get_document(ticker, DocumentKind::Comparables, date);
    auto comparables = parse_document<ComparablesSet>(doc, "comparables document for " + ticker);
    auto failures = check_comparables(comparables);
    if (!failures.empty())
        raise(ErrorCode::SchemaViolation, "comparables document for " + ticker + ": " + failures.front());
    return comparables;
}

} // namespace dbot::fundamentals
