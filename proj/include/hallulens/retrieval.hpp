#pragma once

#include "hallulens/corpus.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace hallulens::retrieval {

struct SearchHit {
    const corpus::Passage* passage = nullptr;
    double score = 0.0;
};

// Scoring model in the tf-idf family. The default is cosine-normalized tf-idf,
// under which a passage's exact text retrieves that passage first whenever
// passage token profiles are not proportional to one another. BM25 is provided
// as the customary alternative; it does not carry that guarantee. Dense
// backends can be substituted behind the same index surface.
class ScoringModel {
public:
    virtual ~ScoringModel() = default;
    virtual double doc_weight(double tf, double df, double n_docs, double doc_len, double avg_len) const = 0;
    virtual double query_weight(double tf, double df, double n_docs) const = 0;
    virtual bool cosine_normalized() const = 0;
    virtual std::string name() const = 0;
};

std::shared_ptr<const ScoringModel> make_tfidf_cosine();
std::shared_ptr<const ScoringModel> make_bm25(double k1 = 1.2, double b = 0.75);

// Immutable lexical index over passages. Build once, then read from any number
// of threads concurrently.
class RetrievalIndex {
public:
    static RetrievalIndex build(std::vector<corpus::Passage> passages,
                                std::shared_ptr<const ScoringModel> model = nullptr);
    static RetrievalIndex build_from_store(const corpus::PageStore& store,
                                           std::size_t max_tokens = corpus::kPassageTokenLimit,
                                           std::shared_ptr<const ScoringModel> model = nullptr);

    // Descending score, ties broken by (page_id, passage_index). Zero-score
    // passages are dropped; an empty query yields an empty result.
    std::vector<SearchHit> search(std::string_view query, std::size_t top_k) const;
    // Single-threaded reference implementation; must agree with search() bit
    // for bit. Kept for tests and the retrieval benchmark.
    std::vector<SearchHit> search_serial(std::string_view query, std::size_t top_k) const;

    const std::vector<corpus::Passage>& passages() const { return passages_; }
    std::size_t vocabulary_size() const { return term_ids_.size(); }

    void save(const std::filesystem::path& path) const;
    static RetrievalIndex load(const std::filesystem::path& path,
                               std::shared_ptr<const ScoringModel> model = nullptr);

private:
    RetrievalIndex() = default;
    void score_range(const std::vector<std::pair<std::uint32_t, double>>& query_terms,
                     std::size_t begin, std::size_t end, std::vector<double>& scores) const;
    std::vector<SearchHit> run_search(std::string_view query, std::size_t top_k, bool parallel) const;

    std::vector<corpus::Passage> passages_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<double> doc_freq_;                       // by term id
    std::vector<std::vector<std::uint32_t>> doc_terms_;  // per doc: sorted term ids
    std::vector<std::vector<float>> doc_tfs_;            // per doc: tf parallel to doc_terms_
    std::vector<double> doc_norm_;                       // cosine norm per doc
    std::vector<double> doc_len_;                        // scoring tokens per doc
    double avg_len_ = 0.0;
    std::shared_ptr<const ScoringModel> model_;
};

}  // namespace hallulens::retrieval
