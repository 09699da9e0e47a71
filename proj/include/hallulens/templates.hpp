#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace hallulens::llm {

// A prompt template is the exact bytes of a shipped data file. Placeholders
// are {identifier} where identifier is [A-Za-z_][A-Za-z0-9_]*; anything else
// between braces (e.g. the JSON examples inside judge prompts) is literal text.
struct PromptTemplate {
    std::string template_id;
    std::string text;
    std::set<std::string> required_vars;
    std::string digest;  // sha256 of the file bytes

    static PromptTemplate from_text(std::string id, std::string text);
};

// Substitutes every placeholder verbatim. Throws naming the first missing var.
std::string render_text(const PromptTemplate& tmpl, const std::map<std::string, std::string>& vars);

// Shipped templates, loaded from a prompts directory and checked against its
// manifest.json digests. The ten inference template variants live in one file,
// one per line, exposed as <file>#<line index>.
class TemplateLibrary {
public:
    static TemplateLibrary load(const std::filesystem::path& prompts_dir, bool verify_manifest = true);

    const PromptTemplate& get(const std::string& template_id) const;
    const PromptTemplate& inference_variant(std::size_t index) const;  // 0..9
    std::size_t inference_variant_count() const { return inference_variants_.size(); }
    std::map<std::string, std::string> digests() const;  // template_id -> sha256

private:
    std::map<std::string, PromptTemplate> templates_;
    std::vector<PromptTemplate> inference_variants_;
};

// Template ids, matching the file names under prompts/.
namespace tmpl {
inline constexpr const char* kPreciseQGen = "precisewikiqa_question_generation";
inline constexpr const char* kPreciseAnswerability = "precisewikiqa_answerability";
inline constexpr const char* kPreciseCorrectness = "precisewikiqa_correctness_judge";
inline constexpr const char* kAbstention = "abstention_judge";
inline constexpr const char* kLongWikiQGen = "longwiki_question_generation";
inline constexpr const char* kClaimExtraction = "longwiki_claim_extraction";
inline constexpr const char* kClaimVerification = "longwiki_claim_verification";
inline constexpr const char* kEntityExtraction = "longwiki_entity_extraction";
inline constexpr const char* kBrainstormBusiness = "nonexistent_brainstorm_business";
inline constexpr const char* kBrainstormEvent = "nonexistent_brainstorm_event";
inline constexpr const char* kBrainstormProduct = "nonexistent_brainstorm_product";
inline constexpr const char* kCombiner = "nonexistent_combiner";
inline constexpr const char* kBeliefSpecies = "nonexistent_belief_species";
inline constexpr const char* kBeliefMedicine = "nonexistent_belief_medicine";
inline constexpr const char* kBeliefGeneric = "nonexistent_belief_generic";
inline constexpr const char* kInferenceVariants = "nonexistent_inference_templates";
}  // namespace tmpl

}  // namespace hallulens::llm
