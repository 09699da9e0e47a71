#pragma once

#include "hallulens/corpus.hpp"
#include "hallulens/gateway.hpp"
#include "hallulens/longwiki.hpp"
#include "hallulens/metrics.hpp"
#include "hallulens/nonexistent.hpp"
#include "hallulens/precise_wikiqa.hpp"
#include "hallulens/retrieval.hpp"
#include "hallulens/util.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hallulens::pipeline {

struct CorpusConfig {
    std::filesystem::path archive;
    std::filesystem::path centrality;
    std::filesystem::path store_cache;  // optional
    int n_bins = 10;
};

struct PreciseConfig {
    std::size_t per_bin = 500;
    int max_retries = 3;
    int infer_max_tokens = 256;
};

struct LongWikiConfig {
    std::size_t per_level = 50;
    std::set<int> levels{5, 6, 7, 8, 9};
    int k = 32;
    std::size_t context_sentences = 1;
    int infer_max_tokens = 1024;
    std::size_t scope_cap = 50;
};

struct MixedConfig {
    std::size_t n_per_domain = 2000;
    std::vector<std::string> domains{"animal", "plant", "bacteria", "medicine"};
    std::map<std::string, std::filesystem::path> name_files;  // domain -> file
};

struct GeneratedConfig {
    std::size_t n_business = 300;
    std::size_t n_event = 300;
    std::size_t n_product = 50;
    std::size_t sets = 3;
    std::size_t names_per_combo = 5;
    std::size_t places_per_group = 30;
    std::filesystem::path places_file;
    std::filesystem::path business_types_file;
    std::filesystem::path event_types_file;
    std::filesystem::path product_types_file;
};

struct NonexistentConfig {
    bool offline = true;
    std::filesystem::path denylist;     // offline verification
    std::string search_base_url;        // web verification
    std::string search_api_key_env;
    MixedConfig mixed;
    GeneratedConfig generated;
};

struct Roles {
    std::string tested;
    std::string qgen;
    std::string answerability;
    std::string abstention_judge;
    std::string correctness_judge;
    std::string extractor;
    std::string verifier;
    std::string belief_judge;
    std::optional<std::string> entity_extractor;  // absent: heuristic scanner
    std::vector<std::string> entity_generators;   // exactly 3
};

struct RunConfig {
    std::string run_id;
    std::filesystem::path artifacts_dir = "runs";
    std::filesystem::path cache_dir;
    std::filesystem::path prompts_dir = "prompts";
    std::uint64_t master_seed = 0;
    int trials = 3;
    std::size_t workers = 8;
    CorpusConfig corpus;
    std::vector<llm::Endpoint> endpoints;
    Roles roles;
    PreciseConfig precise;
    LongWikiConfig longwiki;
    NonexistentConfig nonexistent;

    static RunConfig load(const std::filesystem::path& path);
    // All validation problems at once; empty means the config is usable.
    std::vector<std::string> validate() const;
};

// JSONL helpers shared by the orchestrator and the per-stage CLI commands.
template <typename T>
std::vector<T> load_jsonl(const std::filesystem::path& path) {
    std::vector<T> out;
    for (const std::string& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        out.push_back(T::from_json(nlohmann::json::parse(line)));
    }
    return out;
}

template <typename T>
std::string dump_jsonl(const std::vector<T>& records) {
    std::string out;
    for (const T& r : records) {
        out += r.to_json().dump();
        out += "\n";
    }
    return out;
}

// Stage artifact with digest marker: <path>.done holds sha256 of the artifact
// bytes. A stage re-runs when the artifact or its marker are missing or stale.
bool stage_is_fresh(const std::filesystem::path& path);
void commit_stage(const std::filesystem::path& path, std::string_view content);

corpus::PageStore prepare_corpus(const CorpusConfig& config, std::ostream& log);

class Runner {
public:
    Runner(RunConfig config, std::ostream& log);

    // Runs tasks x trials, aggregates, and emits reports under
    // artifacts_dir/run_id. Returns process exit status.
    int run(const std::set<std::string>& tasks);

    llm::LlmClient& client() { return client_; }
    const llm::TemplateLibrary& templates() const { return templates_; }

private:
    metrics::MetricMap run_precise_trial(const corpus::PageStore& store, int trial,
                                         const std::filesystem::path& dir);
    metrics::MetricMap run_longwiki_trial(const corpus::PageStore& store,
                                          const retrieval::RetrievalIndex& index, int trial,
                                          const std::filesystem::path& dir);
    metrics::MetricMap run_nonexistent_trial(int trial, const std::filesystem::path& dir);

    RunConfig config_;
    std::ostream& log_;
    llm::LlmClient client_;
    llm::TemplateLibrary templates_;
};

}  // namespace hallulens::pipeline
