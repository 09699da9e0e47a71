#pragma once

#include "hallulens/gateway.hpp"
#include "hallulens/metrics.hpp"
#include "hallulens/util.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hallulens::nonexistent {

enum class NameDomain { animal, plant, bacteria, medicine };
std::string domain_name(NameDomain d);
NameDomain domain_from_name(const std::string& name);
bool is_taxonomic(NameDomain d);

struct TaxonRecord {
    std::string genus;
    std::string epithet;
};

// Name database for one domain. Taxonomic loaders keep only two-word species
// names; the medicine loader keeps product names verbatim. Membership is
// exact match after normalization (lowercase, single spaces).
class NameDB {
public:
    static NameDB load(const std::filesystem::path& path, NameDomain domain);

    NameDomain domain() const { return domain_; }
    bool contains(const std::string& name) const { return members_.count(normalize_name(name)) > 0; }
    std::size_t size() const;
    std::size_t skipped_rows() const { return skipped_; }

    const std::vector<TaxonRecord>& taxa() const { return taxa_; }
    const std::vector<std::string>& medicine_names() const { return medicines_; }

private:
    NameDomain domain_ = NameDomain::animal;
    std::vector<TaxonRecord> taxa_;          // taxonomic domains
    std::vector<std::string> medicines_;     // medicine domain
    std::set<std::string> members_;          // normalized full names
    std::size_t skipped_ = 0;
};

struct MixedName {
    std::string name;
    std::string genus;                // taxonomic only
    std::string epithet_source_genus; // taxonomic only; always != genus
};

// Cross-genus mix (taxonomic) or non-initial word swap (medicine); redraws
// until the candidate is absent from the database, bounded.
MixedName mix_name(const NameDB& db, SeededRng& rng, int max_draws = 1000);

enum class Subtask { mixed, generated };
enum class PlaceFrequency { low, mid, high };
std::string place_frequency_name(PlaceFrequency g);

struct NonexistentEntity {
    std::string entity_id;
    Subtask subtask = Subtask::mixed;
    std::string type;  // prompt noun: animal, plant, bacteria, medicine, restaurant, ...
    std::string name;
    std::optional<std::string> place;  // business/event only
    std::optional<PlaceFrequency> place_frequency_group;
    std::string generator_provenance;  // generated subtask: "a+b>combiner"
    bool verified_absent = false;

    nlohmann::json to_json() const;
    static NonexistentEntity from_json(const nlohmann::json& j);
};

std::vector<NonexistentEntity> generate_mixed_set(const NameDB& db, std::size_t n, std::uint64_t seed);

// Pluggable existence check. exists() returning nullopt means transport
// failure: the candidate is skipped, never admitted unverified.
class SearchClient {
public:
    virtual ~SearchClient() = default;
    virtual std::optional<bool> exists(const std::string& name) = 0;
};

// Offline verifier backed by a denylist file (one name per line): a name
// "exists" iff it is on the list.
class DenylistSearchClient : public SearchClient {
public:
    explicit DenylistSearchClient(const std::filesystem::path& denylist_path);
    DenylistSearchClient() = default;
    std::optional<bool> exists(const std::string& name) override;

private:
    std::set<std::string> denylist_;
};

// Web search backend (Brave-compatible JSON shape): the name exists iff it
// appears verbatim (case-insensitive) in any result title or description.
class WebSearchClient : public SearchClient {
public:
    WebSearchClient(std::string base_url, std::string api_key_env);
    std::optional<bool> exists(const std::string& name) override;

private:
    std::string base_url_;
    std::string api_key_env_;
};

bool verify_nonexistence(const std::string& name, SearchClient& search, std::size_t* transport_failures = nullptr);

struct Place {
    std::string name;
    std::string kind;  // city | country
    double ngram_frequency = 0.0;
    PlaceFrequency group = PlaceFrequency::low;
};

// Loads {name, kind, ngram_frequency} and buckets each kind into frequency
// terciles (low/mid/high).
std::vector<Place> load_places(const std::filesystem::path& path);

struct GeneratedSeedSpec {
    std::string kind;  // business | event | product
    std::string type;
    std::string place;  // empty for product
};

// Round-robin candidate generation: A and B brainstorm, the combiner merges.
std::vector<std::string> generate_entity_candidates(const GeneratedSeedSpec& spec, llm::LlmClient& client,
                                                    const std::string& generator_a,
                                                    const std::string& generator_b, const std::string& combiner,
                                                    const llm::TemplateLibrary& templates, std::size_t num,
                                                    const llm::GenerationParams& params = llm::params_with_max_tokens(512));

struct GeneratedSetConfig {
    std::vector<std::string> generator_endpoints;  // exactly 3; set k combines with endpoint k%3
    std::size_t n_business = 300;
    std::size_t n_event = 300;
    std::size_t n_product = 50;
    std::size_t sets = 3;
    std::size_t names_per_combo = 5;
    std::size_t places_per_group = 30;  // 30 => all 90 shipped places; 20 reproduces the sampled-60 reading
    std::vector<std::string> business_types;
    std::vector<std::string> event_types;
    std::vector<std::string> product_types;
    std::vector<Place> places;
    std::size_t workers = 8;
};

struct GeneratedSetResult {
    std::vector<NonexistentEntity> entities;
    std::size_t verification_skips = 0;  // transport failures
    std::vector<std::string> combiner_by_set;
};

GeneratedSetResult build_generated_set(const GeneratedSetConfig& config, llm::LlmClient& client,
                                       const llm::TemplateLibrary& templates, SearchClient& search,
                                       std::uint64_t seed);

// The ten inference wordings from the shipped variants file. A placed entity
// renders {place} as " in <place>"; otherwise the placeholder collapses.
std::string render_inference_prompt(const NonexistentEntity& entity, std::size_t template_index,
                                    const llm::TemplateLibrary& templates);
std::size_t pick_template_index(const NonexistentEntity& entity, std::uint64_t trial_seed,
                                std::size_t variant_count = 10);

struct BeliefVerdict {
    std::string entity_id;
    bool does_believe = false;
    std::string raw_judge_text;
    bool errored = false;
    std::string error;

    nlohmann::json to_json() const;
    static BeliefVerdict from_json(const nlohmann::json& j);
};

BeliefVerdict judge_belief(const NonexistentEntity& entity, const std::string& generation,
                           llm::LlmClient& client, const std::string& judge_endpoint,
                           const llm::TemplateLibrary& templates,
                           const llm::GenerationParams& params = llm::params_with_max_tokens(128));

struct FalseAcceptanceMetrics {
    metrics::MetricValue overall_rate;
    metrics::MetricValue mixed_rate;
    metrics::MetricValue generated_rate;
    metrics::MetricValue average_rate;  // macro average of the two subtasks
    std::map<std::string, metrics::MetricValue> per_domain;
    std::map<std::string, metrics::MetricValue> per_place_frequency;
    std::size_t n_total = 0;
    std::size_t n_believed = 0;
    std::size_t n_errored = 0;

    metrics::MetricMap to_metric_map() const;
    nlohmann::json to_json() const;
};

FalseAcceptanceMetrics score(const std::vector<NonexistentEntity>& entities,
                             const std::vector<BeliefVerdict>& verdicts);

}  // namespace hallulens::nonexistent
