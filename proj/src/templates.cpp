#include "hallulens/templates.hpp"

#include "hallulens/util.hpp"

#include <nlohmann/json.hpp>

#include <cctype>

namespace hallulens::llm {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Finds the placeholder starting at text[pos] == '{'. Returns the identifier,
// or empty if the braces do not enclose a bare identifier.
std::string placeholder_at(const std::string& text, std::size_t pos, std::size_t& end) {
    std::size_t i = pos + 1;
    if (i >= text.size() || !is_ident_start(text[i])) return {};
    std::size_t start = i;
    while (i < text.size() && is_ident_char(text[i])) ++i;
    if (i >= text.size() || text[i] != '}') return {};
    end = i + 1;
    return text.substr(start, i - start);
}

}  // namespace

PromptTemplate PromptTemplate::from_text(std::string id, std::string text) {
    PromptTemplate t;
    t.template_id = std::move(id);
    t.digest = sha256_hex(text);
    t.text = std::move(text);
    for (std::size_t i = 0; i < t.text.size(); ++i) {
        if (t.text[i] != '{') continue;
        std::size_t end = 0;
        std::string name = placeholder_at(t.text, i, end);
        if (!name.empty()) {
            t.required_vars.insert(name);
            i = end - 1;
        }
    }
    return t;
}

std::string render_text(const PromptTemplate& tmpl, const std::map<std::string, std::string>& vars) {
    for (const std::string& name : tmpl.required_vars) {
        if (!vars.count(name)) throw std::runtime_error("missing var: " + name);
    }
    std::string out;
    out.reserve(tmpl.text.size());
    for (std::size_t i = 0; i < tmpl.text.size(); ++i) {
        if (tmpl.text[i] == '{') {
            std::size_t end = 0;
            std::string name = placeholder_at(tmpl.text, i, end);
            if (!name.empty()) {
                out += vars.at(name);
                i = end - 1;
                continue;
            }
        }
        out.push_back(tmpl.text[i]);
    }
    return out;
}

TemplateLibrary TemplateLibrary::load(const std::filesystem::path& prompts_dir, bool verify_manifest) {
    TemplateLibrary lib;
    std::map<std::string, std::string> manifest;
    std::filesystem::path manifest_path = prompts_dir / "manifest.json";
    if (std::filesystem::exists(manifest_path)) {
        nlohmann::json m = nlohmann::json::parse(read_file(manifest_path));
        for (auto& [k, v] : m.items()) manifest[k] = v.get<std::string>();
    } else if (verify_manifest) {
        throw std::runtime_error("prompts manifest missing: " + manifest_path.string());
    }

    for (const auto& entry : std::filesystem::directory_iterator(prompts_dir)) {
        if (entry.path().extension() != ".txt") continue;
        std::string filename = entry.path().filename().string();
        std::string id = entry.path().stem().string();
        std::string text = read_file(entry.path());
        PromptTemplate t = PromptTemplate::from_text(id, std::move(text));
        if (verify_manifest) {
            auto it = manifest.find(filename);
            if (it == manifest.end())
                throw std::runtime_error("template not in manifest: " + filename);
            if (it->second != t.digest)
                throw std::runtime_error("template digest mismatch (edit manifest.json after changing a "
                                         "prompt): " + filename);
        }
        lib.templates_.emplace(id, std::move(t));
    }

    auto it = lib.templates_.find(tmpl::kInferenceVariants);
    if (it != lib.templates_.end()) {
        std::size_t n = 0;
        for (const std::string& line : split(it->second.text, '\n')) {
            if (trim(line).empty()) continue;
            lib.inference_variants_.push_back(PromptTemplate::from_text(
                std::string(tmpl::kInferenceVariants) + "#" + std::to_string(n++), line));
        }
    }
    return lib;
}

const PromptTemplate& TemplateLibrary::get(const std::string& template_id) const {
    auto it = templates_.find(template_id);
    if (it == templates_.end()) throw std::runtime_error("unknown template: " + template_id);
    return it->second;
}

const PromptTemplate& TemplateLibrary::inference_variant(std::size_t index) const {
    if (index >= inference_variants_.size())
        throw std::out_of_range("inference template index out of range: " + std::to_string(index));
    return inference_variants_[index];
}

std::map<std::string, std::string> TemplateLibrary::digests() const {
    std::map<std::string, std::string> out;
    for (const auto& [id, t] : templates_) out[id] = t.digest;
    return out;
}

}  // namespace hallulens::llm
