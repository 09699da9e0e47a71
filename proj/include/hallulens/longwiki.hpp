#pragma once

#include "hallulens/corpus.hpp"
#include "hallulens/gateway.hpp"
#include "hallulens/metrics.hpp"
#include "hallulens/precise_wikiqa.hpp"  // ResponseRecord, RefusalVerdict are shared shapes
#include "hallulens/retrieval.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hallulens::longwiki {

using precise::RefusalVerdict;
using precise::ResponseRecord;

struct LongWikiPrompt {
    std::string prompt_id;
    std::string page_id;
    int difficulty_level = -1;  // 5..9 by default
    std::string prompt_text;
    std::size_t mock_answer_sentence_count = 0;  // >= 4 at admission
    std::uint64_t trial_seed = 0;

    nlohmann::json to_json() const;
    static LongWikiPrompt from_json(const nlohmann::json& j);
};

struct Claim {
    std::string claim_id;
    std::string prompt_id;
    std::string text;
    std::string source_sentence;

    nlohmann::json to_json() const;
    static Claim from_json(const nlohmann::json& j);
};

struct EvidenceRef {
    std::string page_id;
    std::size_t passage_index = 0;
};

struct ClaimVerdict {
    std::string claim_id;
    bool supported = false;
    std::vector<EvidenceRef> evidence;  // <= 5
    std::string raw_judge_text;
    bool errored = false;
    std::string error;

    nlohmann::json to_json() const;
    static ClaimVerdict from_json(const nlohmann::json& j);
};

struct PromptOutcome {
    std::string prompt_id;
    bool refused = false;
    bool errored = false;
    std::size_t supported = 0;  // S
    std::size_t total = 0;      // T
};

struct PromptScore {
    std::string prompt_id;
    std::size_t supported = 0;
    std::size_t total = 0;
    double precision = 0.0;
    double recall_at_k = 0.0;
    double f1_at_k = 0.0;
};

struct LongWikiMetrics {
    metrics::MetricValue false_refusal_rate;
    metrics::MetricValue precision;    // unweighted means over non-refused prompts
    metrics::MetricValue recall_at_k;
    metrics::MetricValue f1_at_k;
    int k = 32;
    std::size_t n_prompts = 0;  // non-errored
    std::size_t n_refused = 0;
    std::size_t n_errored = 0;
    std::vector<PromptScore> per_prompt;  // non-refused prompts, input order

    metrics::MetricMap to_metric_map() const;
    nlohmann::json to_json() const;
};

struct GenOptions {
    std::size_t per_level = 50;
    std::set<int> levels{5, 6, 7, 8, 9};
    llm::GenerationParams qgen_params = llm::params_with_max_tokens(256);
    llm::GenerationParams answer_params = llm::params_with_max_tokens(1024);
    std::size_t min_mock_sentences = 4;
    std::size_t workers = 8;
};

// Essay prompts from mid-difficulty pages. Rejected candidates ("[NO
// QUESTION]", unanswerable, short mock answer) move on to a fresh page of the
// same level; running out of pages before per_level acceptances throws,
// naming the level.
std::vector<LongWikiPrompt> generate_prompts(const corpus::PageStore& store, llm::LlmClient& client,
                                             const std::string& qgen_endpoint,
                                             const std::string& answer_endpoint,
                                             const llm::TemplateLibrary& templates, const GenOptions& options,
                                             std::uint64_t seed);

std::vector<ResponseRecord> run_inference(const std::vector<LongWikiPrompt>& prompts, llm::LlmClient& client,
                                          const std::string& tested_endpoint,
                                          llm::GenerationParams params = llm::params_with_max_tokens(1024),
                                          std::size_t workers = 8);

RefusalVerdict judge_refusal(const LongWikiPrompt& prompt, const ResponseRecord& response,
                             llm::LlmClient& client, const std::string& judge_endpoint,
                             const llm::TemplateLibrary& templates,
                             const llm::GenerationParams& params = llm::params_with_max_tokens(128));

struct ExtractionOptions {
    std::size_t context_sentences = 1;  // context window, each side of the focus sentence
    llm::GenerationParams params = llm::params_with_max_tokens(512);
};

// One extractor call per response sentence; output parsed one claim per line.
// An empty extraction is legal (zero claims).
std::vector<Claim> extract_claims(const LongWikiPrompt& prompt, const std::string& response_text,
                                  llm::LlmClient& client, const std::string& extractor_endpoint,
                                  const llm::TemplateLibrary& templates, const ExtractionOptions& options = {});

// Entity extraction strategy for evidence scoping; the default LLM-backed
// strategy keeps the harness model-hosting-free, the heuristic scanner keeps
// offline runs self-contained.
std::vector<std::string> heuristic_entities(const std::string& text);
std::vector<std::string> llm_entities(const std::string& text, llm::LlmClient& client,
                                      const std::string& endpoint, const llm::TemplateLibrary& templates,
                                      const llm::GenerationParams& params = llm::params_with_max_tokens(256));

struct EvidenceSelection {
    std::vector<corpus::Passage> passages;  // <= 5, deterministic order
    bool fallback_whole_index = false;      // zero scoped pages
};

class EvidenceSelector {
public:
    EvidenceSelector(const corpus::PageStore& store, const retrieval::RetrievalIndex& full_index,
                     std::size_t scope_cap = 50, std::size_t top_k = 5);

    // entities: output of either extraction strategy for the prompt.
    EvidenceSelection select(const Claim& claim, const LongWikiPrompt& prompt,
                             const std::vector<std::string>& entities) const;

private:
    const corpus::PageStore& store_;
    const retrieval::RetrievalIndex& full_index_;
    std::size_t scope_cap_;
    std::size_t top_k_;
};

ClaimVerdict verify_claim(const Claim& claim, const EvidenceSelection& evidence, llm::LlmClient& client,
                          const std::string& verifier_endpoint, const llm::TemplateLibrary& templates,
                          const llm::GenerationParams& params = llm::params_with_max_tokens(128));

// Per non-refused prompt: P = S/T (0 when T = 0), R@K = min(S,K)/K, F1 = 0
// when S = 0 else harmonic mean; the report carries unweighted means of the
// per-prompt values (mean of F1, not F1 of means).
LongWikiMetrics score(const std::vector<PromptOutcome>& outcomes, int k = 32);

}  // namespace hallulens::longwiki
