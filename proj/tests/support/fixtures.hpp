#pragma once

#include "hallulens/corpus.hpp"
#include "hallulens/gateway.hpp"
#include "hallulens/templates.hpp"
#include "hallulens/util.hpp"

#include <filesystem>
#include <string>
#include <vector>

// Shared fixture builders for the test binaries. Paths below are injected by
// CMake; tests read shipped prompts and committed fixture files from the
// source tree and write scratch output under a per-test temp dir.

#ifndef HALLULENS_SOURCE_DIR
#error "HALLULENS_SOURCE_DIR must be defined by the build"
#endif

namespace testsupport {

inline std::filesystem::path source_dir() { return HALLULENS_SOURCE_DIR; }
inline std::filesystem::path prompts_dir() { return source_dir() / "prompts"; }
inline std::filesystem::path fixtures_dir() { return source_dir() / "tests" / "fixtures"; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }

inline const hallulens::llm::TemplateLibrary& templates() {
    static hallulens::llm::TemplateLibrary lib = hallulens::llm::TemplateLibrary::load(prompts_dir());
    return lib;
}

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
    std::filesystem::path dir =
        std::filesystem::temp_directory_path() / ("hallulens-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// A small synthetic corpus: n pages, page i carrying centrality (i+1)*10 and
// distinct body text, so 10 equal bins put pages 5b..5b+4 into bin b when
// n == 50.
inline hallulens::corpus::PageStore synthetic_store(std::size_t n, std::size_t sections_per_page = 3) {
    using namespace hallulens;
    static const std::vector<std::string> words = {
        "river",   "valley",  "harvest", "festival",   "bridge",  "museum", "archive", "garden",
        "temple",  "market",  "causeway", "library",   "plaza",   "meadow", "orchard", "windmill",
        "quarry",  "lighthouse", "observatory", "aqueduct"};
    std::vector<corpus::WikiPage> pages;
    for (std::size_t i = 0; i < n; ++i) {
        corpus::WikiPage p;
        char id[16];
        std::snprintf(id, sizeof(id), "P%03zu", i);
        p.page_id = id;
        p.title = "Chronicle of District " + std::to_string(i);
        p.harmonic_centrality = static_cast<double>((i + 1) * 10);
        std::string body = "District " + std::to_string(i) + " overview, uniquetok" + std::to_string(i) + ".\n";
        for (std::size_t s = 0; s < sections_per_page; ++s) {
            body += "\n## Section " + std::to_string(s + 1) + "\n\n";
            for (std::size_t w = 0; w < 30; ++w) {
                // a page-unique token every few words keeps every chunk distinct
                if (w % 8 == 4) body += "tag" + std::to_string(i) + "s" + std::to_string(s) + "w" + std::to_string(w) + " ";
                body += words[(i * 7 + s * 3 + w) % words.size()] + " ";
            }
            body += "marker" + std::to_string(i) + "x" + std::to_string(s) + ".\n";
        }
        p.body = body;
        pages.push_back(std::move(p));
    }
    return corpus::PageStore(std::move(pages));
}

inline hallulens::llm::Endpoint mock_endpoint(std::string name,
                                              std::vector<hallulens::llm::MockRule> rules,
                                              std::optional<std::string> default_reply = std::nullopt) {
    hallulens::llm::Endpoint ep;
    ep.name = std::move(name);
    ep.model_id = "mock-" + ep.name;
    ep.backend = hallulens::llm::Endpoint::Backend::mock;
    ep.mock_rules = std::move(rules);
    ep.mock_default_reply = std::move(default_reply);
    return ep;
}

inline hallulens::llm::MockRule contains_rule(std::string pattern, std::string reply) {
    return {hallulens::llm::MockRule::Match::contains, std::move(pattern), std::move(reply)};
}

}  // namespace testsupport
