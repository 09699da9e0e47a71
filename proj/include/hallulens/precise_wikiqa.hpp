#pragma once

#include "hallulens/corpus.hpp"
#include "hallulens/gateway.hpp"
#include "hallulens/metrics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hallulens::precise {

struct QAItem {
    std::string item_id;
    std::string page_id;
    int difficulty_bin = -1;
    std::string section_heading;
    std::string question;
    std::string gold_answer;  // <= 10 whitespace tokens, judged answerable
    std::uint64_t trial_seed = 0;

    nlohmann::json to_json() const;
    static QAItem from_json(const nlohmann::json& j);
};

struct SourceSelection {
    const corpus::WikiPage* page = nullptr;
    std::size_t section_index = 0;
    corpus::Section section;
};

struct Rejection {
    std::string page_id;
    std::string reason;
};

struct ResponseRecord {
    std::string item_id;
    std::string prompt_text;
    std::string endpoint;
    llm::GenerationParams params;
    std::string text;
    bool errored = false;
    std::string error;

    nlohmann::json to_json() const;
    static ResponseRecord from_json(const nlohmann::json& j);
};

struct RefusalVerdict {
    std::string item_id;
    bool is_abstaining = false;
    std::string raw_judge_text;

    nlohmann::json to_json() const;
    static RefusalVerdict from_json(const nlohmann::json& j);
};

enum class CorrectnessLabel { CORRECT, INCORRECT, UNVERIFIABLE };
std::string label_name(CorrectnessLabel label);
CorrectnessLabel label_from_name(const std::string& name);

struct CorrectnessVerdict {
    std::string item_id;
    CorrectnessLabel label = CorrectnessLabel::UNVERIFIABLE;
    std::string raw_judge_text;

    nlohmann::json to_json() const;
    static CorrectnessVerdict from_json(const nlohmann::json& j);
};

struct PreciseCounts {
    std::size_t n_total = 0;  // judged items (errored excluded)
    std::size_t n_refused = 0;
    std::size_t n_correct = 0;
    std::size_t n_incorrect = 0;
    std::size_t n_unverifiable = 0;
    std::size_t n_errored = 0;  // reported separately, excluded from rates
};

struct PreciseMetrics {
    metrics::MetricValue false_refusal_rate;
    metrics::MetricValue hallucination_rate_not_refused;  // undefined when all refused
    metrics::MetricValue correct_answer_rate;
    PreciseCounts counts;
    std::map<int, PreciseCounts> per_bin_counts;

    metrics::MetricMap to_metric_map(bool include_bins = true) const;
    nlohmann::json to_json() const;
};

struct GenOptions {
    std::size_t per_bin = 500;
    int max_retries = 3;  // question regeneration budget per source
    llm::GenerationParams qgen_params = llm::params_with_max_tokens(256);
    llm::GenerationParams answer_params = llm::params_with_max_tokens(256);
    std::size_t workers = 8;
    std::size_t gold_answer_max_tokens = 10;
};

// Seeded, deterministic: per_bin pages per bin, one uniformly chosen section
// each. Throws naming the first underfull bin.
std::vector<SourceSelection> select_sources(const corpus::PageStore& store, std::size_t per_bin,
                                            std::uint64_t seed);

struct QAGenResult {
    std::vector<QAItem> items;
    std::vector<Rejection> rejections;
};

// Two-step QA generation: question from the QGen template, then the
// answerability judge answers it from the section. "unanswerable" replies and
// gold answers longer than the token cap consume the retry budget.
std::optional<QAItem> generate_qa(const SourceSelection& source, llm::LlmClient& client,
                                  const std::string& qgen_endpoint, const std::string& answer_endpoint,
                                  const llm::TemplateLibrary& templates, const GenOptions& options,
                                  std::uint64_t trial_seed, std::string* reject_reason = nullptr);

QAGenResult generate_test_set(const corpus::PageStore& store, llm::LlmClient& client,
                              const std::string& qgen_endpoint, const std::string& answer_endpoint,
                              const llm::TemplateLibrary& templates, const GenOptions& options,
                              std::uint64_t seed);

// One record per item, question as the sole user message. Transport failures
// mark the record errored instead of aborting the run.
std::vector<ResponseRecord> run_inference(const std::vector<QAItem>& items, llm::LlmClient& client,
                                          const std::string& tested_endpoint,
                                          const llm::GenerationParams& params, std::size_t workers = 8);

RefusalVerdict judge_abstention(const QAItem& item, const ResponseRecord& response, llm::LlmClient& client,
                                const std::string& judge_endpoint, const llm::TemplateLibrary& templates,
                                const llm::GenerationParams& params = llm::params_with_max_tokens(128));

CorrectnessVerdict judge_correctness(const QAItem& item, const ResponseRecord& response,
                                     llm::LlmClient& client, const std::string& judge_endpoint,
                                     const llm::TemplateLibrary& templates,
                                     const llm::GenerationParams& params = llm::params_with_max_tokens(128));

// FRR = refused/total, H = (incorrect+unverifiable)/(total-refused) or
// undefined, CAR = correct/total; identical arithmetic within each bin.
PreciseMetrics score(const std::vector<QAItem>& items, const std::vector<ResponseRecord>& responses,
                     const std::vector<RefusalVerdict>& refusals,
                     const std::vector<CorrectnessVerdict>& correctness);

}  // namespace hallulens::precise
