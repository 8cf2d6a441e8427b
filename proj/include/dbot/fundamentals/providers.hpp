#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "dbot/fundamentals/types.hpp"
#include "dbot/util/dates.hpp"

namespace dbot::fundamentals {

enum class DocumentKind { Fundamentals, Consensus, Comparables, News };

const char* document_kind_name(DocumentKind kind);

// Narrow provider contract: one request per document type, canonical JSON
// back. Adapters surface timeouts and retryability through ProviderError.
class DataProvider {
public:
    virtual ~DataProvider() = default;

    // Throws NotFound when the document does not exist for (ticker, as_of).
    virtual nlohmann::json get_document(const std::string& ticker, DocumentKind kind,
                                        const std::string& as_of) = 0;

    // Latest available fundamentals date <= the run clock; NotFound if none.
    virtual std::string latest_as_of(const std::string& ticker, const std::string& run_clock_today) = 0;
};

// Reads canonical documents from `<root>/<TICKER>/<as_of>.json` and siblings
// (`.consensus.json`, `.comparables.json`, `.news.json`).
class FixtureProvider : public DataProvider {
public:
    explicit FixtureProvider(std::string root);
    nlohmann::json get_document(const std::string& ticker, DocumentKind kind, const std::string& as_of) override;
    std::string latest_as_of(const std::string& ticker, const std::string& run_clock_today) override;

private:
    std::string root_;
};

// Resolves a provider selector. `fixture:<path>` is built in; anything else
// must have been registered first (real providers live out of tree).
std::shared_ptr<DataProvider> make_provider(const std::string& source);
void register_provider(const std::string& scheme,
                       std::shared_ptr<DataProvider> (*factory)(const std::string& rest));

// Document loaders. `as_of` empty means "latest at the run clock".
FundamentalsSnapshot load_fundamentals(const std::string& ticker, const std::string& source,
                                       const std::string& as_of, const util::RunClock& clock);
ConsensusEstimates fetch_consensus(const std::string& ticker, const std::string& source, const std::string& as_of,
                                   const util::RunClock& clock);
ComparablesSet fetch_comparables(const std::string& ticker, const std::string& source, const std::string& as_of,
                                 const util::RunClock& clock);

} // namespace dbot::fundamentals
