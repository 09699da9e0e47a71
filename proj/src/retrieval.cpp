#include "hallulens/retrieval.hpp"

#include "hallulens/tokenize.hpp"
#include "hallulens/util.hpp"

#include <algorithm>
#include <cmath>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace hallulens::retrieval {

namespace {

// Smoothed idf, strictly positive so every shared term contributes.
double idf(double df, double n_docs) {
    return std::log((n_docs + 1.0) / (df + 1.0)) + 1.0;
}

class TfIdfCosine final : public ScoringModel {
public:
    double doc_weight(double tf, double df, double n_docs, double, double) const override {
        return (1.0 + std::log(tf)) * idf(df, n_docs);
    }
    double query_weight(double tf, double df, double n_docs) const override {
        return (1.0 + std::log(tf)) * idf(df, n_docs);
    }
    bool cosine_normalized() const override { return true; }
    std::string name() const override { return "tfidf_cosine"; }
};

class Bm25 final : public ScoringModel {
public:
    Bm25(double k1, double b) : k1_(k1), b_(b) {}
    double doc_weight(double tf, double df, double n_docs, double doc_len, double avg_len) const override {
        double denom = tf + k1_ * (1.0 - b_ + b_ * (avg_len > 0 ? doc_len / avg_len : 1.0));
        return idf(df, n_docs) * (tf * (k1_ + 1.0)) / denom;
    }
    double query_weight(double tf, double, double) const override { return tf; }
    bool cosine_normalized() const override { return false; }
    std::string name() const override { return "bm25"; }

private:
    double k1_, b_;
};

}  // namespace

std::shared_ptr<const ScoringModel> make_tfidf_cosine() { return std::make_shared<TfIdfCosine>(); }
std::shared_ptr<const ScoringModel> make_bm25(double k1, double b) { return std::make_shared<Bm25>(k1, b); }

RetrievalIndex RetrievalIndex::build(std::vector<corpus::Passage> passages,
                                     std::shared_ptr<const ScoringModel> model) {
    RetrievalIndex idx;
    idx.model_ = model ? std::move(model) : make_tfidf_cosine();
    idx.passages_ = std::move(passages);
    const std::size_t n = idx.passages_.size();
    idx.doc_terms_.resize(n);
    idx.doc_tfs_.resize(n);
    idx.doc_norm_.assign(n, 0.0);
    idx.doc_len_.assign(n, 0.0);

    double total_len = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
        std::vector<std::string> tokens = scoring_tokens(idx.passages_[d].text);
        idx.doc_len_[d] = static_cast<double>(tokens.size());
        total_len += idx.doc_len_[d];
        std::sort(tokens.begin(), tokens.end());
        auto& terms = idx.doc_terms_[d];
        auto& tfs = idx.doc_tfs_[d];
        for (std::size_t i = 0; i < tokens.size();) {
            std::size_t j = i;
            while (j < tokens.size() && tokens[j] == tokens[i]) ++j;
            auto [it, inserted] =
                idx.term_ids_.try_emplace(tokens[i], static_cast<std::uint32_t>(idx.term_ids_.size()));
            if (inserted) idx.doc_freq_.push_back(0.0);
            idx.doc_freq_[it->second] += 1.0;
            terms.push_back(it->second);
            tfs.push_back(static_cast<float>(j - i));
            i = j;
        }
        // term ids are insertion-ordered; re-sort per doc for binary search
        std::vector<std::size_t> perm(terms.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return terms[a] < terms[b]; });
        std::vector<std::uint32_t> st(terms.size());
        std::vector<float> sf(terms.size());
        for (std::size_t i = 0; i < perm.size(); ++i) {
            st[i] = terms[perm[i]];
            sf[i] = tfs[perm[i]];
        }
        terms = std::move(st);
        tfs = std::move(sf);
    }
    idx.avg_len_ = n ? total_len / static_cast<double>(n) : 0.0;

    // Cosine norms need final document frequencies, so a second pass.
    for (std::size_t d = 0; d < n; ++d) {
        double sum = 0.0;
        for (std::size_t i = 0; i < idx.doc_terms_[d].size(); ++i) {
            double w = idx.model_->doc_weight(idx.doc_tfs_[d][i], idx.doc_freq_[idx.doc_terms_[d][i]],
                                              static_cast<double>(n), idx.doc_len_[d], idx.avg_len_);
            sum += w * w;
        }
        idx.doc_norm_[d] = std::sqrt(sum);
    }
    return idx;
}

RetrievalIndex RetrievalIndex::build_from_store(const corpus::PageStore& store, std::size_t max_tokens,
                                                std::shared_ptr<const ScoringModel> model) {
    std::vector<corpus::Passage> passages;
    for (const corpus::WikiPage& page : store.pages()) {
        for (corpus::Passage& p : corpus::chunk_passages(page, max_tokens)) passages.push_back(std::move(p));
    }
    return build(std::move(passages), std::move(model));
}

void RetrievalIndex::score_range(const std::vector<std::pair<std::uint32_t, double>>& query_terms,
                                 std::size_t begin, std::size_t end, std::vector<double>& scores) const {
    const double n_docs = static_cast<double>(passages_.size());
    for (std::size_t d = begin; d < end; ++d) {
        const auto& terms = doc_terms_[d];
        const auto& tfs = doc_tfs_[d];
        double dot = 0.0;
        for (const auto& [tid, qw] : query_terms) {
            auto it = std::lower_bound(terms.begin(), terms.end(), tid);
            if (it == terms.end() || *it != tid) continue;
            std::size_t pos = static_cast<std::size_t>(it - terms.begin());
            dot += qw * model_->doc_weight(tfs[pos], doc_freq_[tid], n_docs, doc_len_[d], avg_len_);
        }
        if (dot != 0.0 && model_->cosine_normalized() && doc_norm_[d] > 0.0) dot /= doc_norm_[d];
        scores[d] = dot;
    }
}

std::vector<SearchHit> RetrievalIndex::run_search(std::string_view query, std::size_t top_k,
                                                  bool parallel) const {
    std::vector<SearchHit> hits;
    if (top_k == 0 || passages_.empty()) return hits;
    std::vector<std::string> tokens = scoring_tokens(query);
    if (tokens.empty()) return hits;

    std::sort(tokens.begin(), tokens.end());
    std::vector<std::pair<std::uint32_t, double>> query_terms;  // (term id, query weight)
    double qnorm = 0.0;
    const double n_docs = static_cast<double>(passages_.size());
    for (std::size_t i = 0; i < tokens.size();) {
        std::size_t j = i;
        while (j < tokens.size() && tokens[j] == tokens[i]) ++j;
        auto it = term_ids_.find(tokens[i]);
        if (it != term_ids_.end()) {
            double qw = model_->query_weight(static_cast<double>(j - i), doc_freq_[it->second], n_docs);
            query_terms.emplace_back(it->second, qw);
            qnorm += qw * qw;
        } else if (model_->cosine_normalized()) {
            // unseen terms still contribute to the query norm
            double qw = model_->query_weight(static_cast<double>(j - i), 0.0, n_docs);
            qnorm += qw * qw;
        }
        i = j;
    }
    if (query_terms.empty()) return hits;
    std::sort(query_terms.begin(), query_terms.end());
    qnorm = std::sqrt(qnorm);

    std::vector<double> scores(passages_.size(), 0.0);
#if defined(_OPENMP)
    if (parallel && passages_.size() >= 256) {
        const std::size_t n = passages_.size();
#pragma omp parallel
        {
            const std::size_t nt = static_cast<std::size_t>(omp_get_num_threads());
            const std::size_t tid = static_cast<std::size_t>(omp_get_thread_num());
            const std::size_t chunk = (n + nt - 1) / nt;
            const std::size_t begin = std::min(n, tid * chunk);
            const std::size_t end = std::min(n, begin + chunk);
            if (begin < end) score_range(query_terms, begin, end, scores);
        }
    } else {
        score_range(query_terms, 0, passages_.size(), scores);
    }
#else
    (void)parallel;
    score_range(query_terms, 0, passages_.size(), scores);
#endif

    std::vector<std::size_t> order;
    order.reserve(64);
    for (std::size_t d = 0; d < scores.size(); ++d) {
        if (scores[d] > 0.0) order.push_back(d);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        const auto& pa = passages_[a];
        const auto& pb = passages_[b];
        if (pa.page_id != pb.page_id) return pa.page_id < pb.page_id;
        return pa.passage_index < pb.passage_index;
    });
    if (order.size() > top_k) order.resize(top_k);
    hits.reserve(order.size());
    const bool norm = model_->cosine_normalized() && qnorm > 0.0;
    for (std::size_t d : order) hits.push_back({&passages_[d], norm ? scores[d] / qnorm : scores[d]});
    return hits;
}

std::vector<SearchHit> RetrievalIndex::search(std::string_view query, std::size_t top_k) const {
    return run_search(query, top_k, true);
}

std::vector<SearchHit> RetrievalIndex::search_serial(std::string_view query, std::size_t top_k) const {
    return run_search(query, top_k, false);
}

namespace {
constexpr char kIndexMagic[8] = {'H', 'L', 'I', 'N', 'D', 'E', 'X', '1'};
}

void RetrievalIndex::save(const std::filesystem::path& path) const {
    // Persist the passages only; the term statistics are rebuilt on load. The
    // build is deterministic, so save/load round-trips to an identical index.
    std::string out(kIndexMagic, sizeof(kIndexMagic));
    auto put_u64 = [&out](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    auto put_str = [&](const std::string& s) {
        put_u64(s.size());
        out += s;
    };
    put_u64(passages_.size());
    for (const corpus::Passage& p : passages_) {
        put_str(p.page_id);
        put_str(p.page_title);
        put_u64(p.passage_index);
        put_str(p.text);
        put_u64(p.token_count);
    }
    write_file_atomic(path, out);
}

RetrievalIndex RetrievalIndex::load(const std::filesystem::path& path,
                                    std::shared_ptr<const ScoringModel> model) {
    std::string data = read_file(path);
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (pos + n > data.size()) throw std::runtime_error("index cache truncated: " + path.string());
    };
    need(sizeof(kIndexMagic));
    if (std::string_view(data.data(), sizeof(kIndexMagic)) != std::string_view(kIndexMagic, sizeof(kIndexMagic)))
        throw std::runtime_error("stale or foreign index cache: " + path.string());
    pos = sizeof(kIndexMagic);
    auto get_u64 = [&]() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 8;
        return v;
    };
    auto get_str = [&]() {
        std::uint64_t n = get_u64();
        need(n);
        std::string s = data.substr(pos, n);
        pos += n;
        return s;
    };
    std::uint64_t n = get_u64();
    std::vector<corpus::Passage> passages;
    passages.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        corpus::Passage p;
        p.page_id = get_str();
        p.page_title = get_str();
        p.passage_index = get_u64();
        p.text = get_str();
        p.token_count = get_u64();
        passages.push_back(std::move(p));
    }
    return build(std::move(passages), std::move(model));
}

}  // namespace hallulens::retrieval
