#pragma once

#include "support/fixtures.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

// Scripted offline run over the committed 50-page mini corpus. Every page
// section carries a BINMARK-<b> token, so the mocks key their behaviour off
// the difficulty bin:
//   bins 0,1   -> the tested model refuses               (FRR  = 2/10)
//   bins 2..6  -> judged CORRECT                         (CAR  = 5/10)
//   bins 7,8   -> judged INCORRECT                       |
//   bin  9     -> judged UNVERIFIABLE                    (H    = 3/8)
// With per_bin = 1 this reproduces the 10-item fixture numbers exactly.

namespace testsupport {

inline nlohmann::json smoke_config(const std::filesystem::path& work_dir) {
    using nlohmann::json;
    json endpoints = json::array();

    auto mock = [](const std::string& name, json rules, const std::string& fallback) {
        json ep{{"name", name}, {"backend", "mock"}, {"model_id", "mock-" + name}, {"rules", std::move(rules)}};
        ep["default_reply"] = fallback;
        return ep;
    };
    auto rule = [](const std::string& pattern, const std::string& reply) {
        return nlohmann::json{{"match", "contains"}, {"pattern", pattern}, {"reply", reply}};
    };

    // QA and essay generation prompts embed the section text, hence the
    // BINMARK token; the template preamble tells the two apart.
    json qgen_rules = json::array();
    for (int b = 0; b <= 9; ++b) {
        std::string marker = "BINMARK-" + std::to_string(b);
        qgen_rules.push_back(json{{"match", "regex"},
                                  {"pattern", "act as an essay question generator[\\s\\S]*" + marker},
                                  {"reply", "Describe QB" + std::to_string(b) + " over the years."}});
        qgen_rules.push_back(json{{"match", "regex"},
                                  {"pattern", "act as a question generator[\\s\\S]*" + marker},
                                  {"reply", "QB" + std::to_string(b) + " what is stored here?"}});
    }
    endpoints.push_back(mock("qgen", qgen_rules, "[NO QUESTION]"));

    json ans_rules = json::array();
    for (int b = 0; b <= 9; ++b) {
        std::string q = "QB" + std::to_string(b);
        ans_rules.push_back(rule("Question: Describe " + q,
                                 "Fact one stands. Fact two follows. Fact three continues. Fact four closes."));
        ans_rules.push_back(rule("Question: " + q, "gold" + std::to_string(b)));
    }
    endpoints.push_back(mock("answer", ans_rules, "unanswerable"));

    json tested_rules = json::array();
    for (int b = 0; b <= 1; ++b)
        tested_rules.push_back(rule("QB" + std::to_string(b) + " what",
                                    "I couldn't find any information on that topic."));
    for (int b = 2; b <= 6; ++b)
        tested_rules.push_back(rule("QB" + std::to_string(b) + " what", "The answer is gold."));
    for (int b = 7; b <= 8; ++b)
        tested_rules.push_back(rule("QB" + std::to_string(b) + " what", "It is definitely blue."));
    tested_rules.push_back(rule("QB9 what", "Possibly the answer might be unknowable."));
    // long-form: level 5 refuses, others produce two extractable sentences
    tested_rules.push_back(rule("Describe QB5", "I couldn't find any information on that topic."));
    for (int b = 6; b <= 9; ++b)
        tested_rules.push_back(rule("Describe QB" + std::to_string(b),
                                    "The district keeps detailed records. Every archive lists the harvest."));
    // fabricated entities: medicines get a confident reply, everything else a refusal
    tested_rules.push_back(rule("medicine", "It is a well-known product in several markets."));
    endpoints.push_back(mock("tested", tested_rules, "I couldn't find anything about that."));

    json abst_rules = json::array();
    abst_rules.push_back(rule("Chatbot:I couldn't find", R"({"is_abstaining":true})"));
    abst_rules.push_back(rule("Chatbot:I don't have enough", R"({"is_abstaining":true})"));
    endpoints.push_back(mock("judge", abst_rules, R"({"is_abstaining":false})"));

    json corr_rules = json::array();
    corr_rules.push_back(rule("The answer is gold.", "CORRECT"));
    corr_rules.push_back(rule("definitely blue", "INCORRECT"));
    endpoints.push_back(mock("correctness", corr_rules, "UNVERIFIABLE"));

    endpoints.push_back(mock("extractor", json::array(),
                             "Alpha claim about records.\nBeta claim about archives."));
    json verify_rules = json::array();
    verify_rules.push_back(rule("Claim: Alpha claim", R"({"supported": true})"));
    endpoints.push_back(mock("verifier", verify_rules, R"({"supported": false})"));

    json belief_rules = json::array();
    belief_rules.push_back(rule("well-known product", R"({"does_believe": true})"));
    endpoints.push_back(mock("belief", belief_rules, R"({"does_believe": false})"));

    for (int g = 0; g < 3; ++g) {
        endpoints.push_back(mock("gen" + std::to_string(g), json::array(),
                                 "Name g" + std::to_string(g) + "-{PROMPT_SHA8}a, Name g" + std::to_string(g) +
                                     "-{PROMPT_SHA8}b, Name g" + std::to_string(g) + "-{PROMPT_SHA8}c"));
    }

    json config{
        {"run_id", "smoke"},
        {"artifacts_dir", (work_dir / "runs").string()},
        {"cache_dir", (work_dir / "cache").string()},
        {"prompts_dir", prompts_dir().string()},
        {"master_seed", 20250809},
        {"trials", 1},
        {"workers", 4},
        {"corpus",
         {{"archive", (fixtures_dir() / "mini_corpus.jsonl").string()},
          {"centrality", (fixtures_dir() / "mini_centrality.tsv").string()},
          {"n_bins", 10}}},
        {"endpoints", endpoints},
        {"roles",
         {{"tested", "tested"},
          {"qgen", "qgen"},
          {"answerability", "answer"},
          {"abstention_judge", "judge"},
          {"correctness_judge", "correctness"},
          {"extractor", "extractor"},
          {"verifier", "verifier"},
          {"belief_judge", "belief"},
          {"entity_generators", {"gen0", "gen1", "gen2"}}}},
        {"precisewikiqa", {{"per_bin", 1}, {"max_retries", 2}, {"infer_max_tokens", 128}}},
        {"longwiki", {{"per_level", 1}, {"levels", {5, 6, 7, 8, 9}}, {"k", 32}}},
        {"nonexistent",
         {{"offline", true},
          {"denylist", (fixtures_dir() / "denylist.txt").string()},
          {"mixed",
           {{"n_per_domain", 5},
            {"domains", {"animal", "medicine"}},
            {"name_files",
             {{"animal", (fixtures_dir() / "itis_species.txt").string()},
              {"medicine", (fixtures_dir() / "medicines.csv").string()}}}}},
          {"generated",
           {{"n_business", 4},
            {"n_event", 2},
            {"n_product", 2},
            {"sets", 3},
            {"names_per_combo", 3},
            {"places_per_group", 2},
            {"places", (data_dir() / "places.csv").string()},
            {"business_types", (data_dir() / "business_types.txt").string()},
            {"event_types", (data_dir() / "event_types.txt").string()},
            {"product_types", (data_dir() / "product_types.txt").string()}}}}},
    };
    return config;
}

inline std::filesystem::path write_smoke_config(const std::filesystem::path& work_dir) {
    auto path = work_dir / "config.json";
    hallulens::write_file_atomic(path, smoke_config(work_dir).dump(2) + "\n");
    return path;
}

}  // namespace testsupport
