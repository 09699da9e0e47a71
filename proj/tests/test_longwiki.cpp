#include "hallulens/longwiki.hpp"

#include "hallulens/pipeline.hpp"
#include "hallulens/util.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

using namespace hallulens;

namespace {

corpus::PageStore binned_store(std::size_t n) {
    corpus::PageStore store = testsupport::synthetic_store(n);
    corpus::assign_bins(store, 10);
    return store;
}

const std::string kFourSentences =
    "The first fact stands. The second fact follows. The third fact continues. The fourth fact closes.";

void setup_prompt_gen(llm::LlmClient& client, const std::string& answer_reply) {
    client.register_endpoint(
        testsupport::mock_endpoint("qgen", {}, std::string("Describe the topic of {PROMPT_SHA8}?")));
    client.register_endpoint(testsupport::mock_endpoint("ans", {}, answer_reply));
}

}  // namespace

TEST_CASE("generate_prompts samples per level with answerability and length checks") {
    corpus::PageStore store = binned_store(50);
    longwiki::GenOptions options;
    options.per_level = 2;
    options.workers = 4;

    SUBCASE("accepted prompts cover levels 5..9") {
        llm::LlmClient client;
        setup_prompt_gen(client, kFourSentences);
        auto prompts = longwiki::generate_prompts(store, client, "qgen", "ans", testsupport::templates(),
                                                  options, 5);
        REQUIRE(prompts.size() == 10);
        std::map<int, int> per_level;
        for (const auto& p : prompts) {
            per_level[p.difficulty_level]++;
            CHECK(p.mock_answer_sentence_count >= 4);
        }
        CHECK(per_level == std::map<int, int>{{5, 2}, {6, 2}, {7, 2}, {8, 2}, {9, 2}});
    }
    SUBCASE("three-sentence mock answers are discarded, four accepted") {
        llm::LlmClient reject;
        setup_prompt_gen(reject, "One here. Two here. Three only here.");
        CHECK_THROWS_WITH_AS(longwiki::generate_prompts(store, reject, "qgen", "ans",
                                                        testsupport::templates(), options, 5),
                             doctest::Contains("level 5"), std::runtime_error);
        llm::LlmClient accept;
        setup_prompt_gen(accept, kFourSentences);
        CHECK(longwiki::generate_prompts(store, accept, "qgen", "ans", testsupport::templates(), options, 5)
                  .size() == 10);
    }
    SUBCASE("[NO QUESTION] everywhere exhausts the level pool") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint("qgen", {}, std::string("[NO QUESTION]")));
        client.register_endpoint(testsupport::mock_endpoint("ans", {}, kFourSentences));
        CHECK_THROWS_WITH_AS(longwiki::generate_prompts(store, client, "qgen", "ans",
                                                        testsupport::templates(), options, 5),
                             doctest::Contains("level 5 exhausted"), std::runtime_error);
    }
    SUBCASE("deterministic under a fixed seed") {
        llm::LlmClient c1, c2;
        setup_prompt_gen(c1, kFourSentences);
        setup_prompt_gen(c2, kFourSentences);
        auto a = longwiki::generate_prompts(store, c1, "qgen", "ans", testsupport::templates(), options, 77);
        auto b = longwiki::generate_prompts(store, c2, "qgen", "ans", testsupport::templates(), options, 77);
        CHECK(pipeline::dump_jsonl(a) == pipeline::dump_jsonl(b));
    }
}

TEST_CASE("longwiki run_inference echoes the 1024-token decoding contract") {
    std::vector<longwiki::LongWikiPrompt> prompts(2);
    prompts[0].prompt_id = "a";
    prompts[0].prompt_text = "Describe A.";
    prompts[1].prompt_id = "b";
    prompts[1].prompt_text = "Describe B.";
    llm::LlmClient client;
    client.register_endpoint(testsupport::mock_endpoint("tested", {}, std::string("Long answer.")));
    auto records = longwiki::run_inference(prompts, client, "tested");
    REQUIRE(records.size() == 2);
    for (const auto& r : records) {
        CHECK(r.params.max_tokens == 1024);
        CHECK(r.params.temperature == 0.0);
        CHECK(r.params.top_p == 1.0);
    }
    SUBCASE("permanent failure marks the record errored") {
        llm::LlmClient strict;
        strict.register_endpoint(
            testsupport::mock_endpoint("tested", {testsupport::contains_rule("Describe A.", "ok")}));
        auto recs = longwiki::run_inference(prompts, strict, "tested");
        CHECK_FALSE(recs[0].errored);
        CHECK(recs[1].errored);
    }
}

TEST_CASE("extract_claims parses one claim per line over sentence windows") {
    longwiki::LongWikiPrompt prompt;
    prompt.prompt_id = "p";
    prompt.prompt_text = "Describe the flag.";

    SUBCASE("the flag sentence decomposes into three claims") {
        const std::string response =
            "The Japanese Empress's flag features a similar chrysanthemum design, but it is smaller and "
            "placed on a white background, also in a square shape.";
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint(
            "ext", {},
            std::string("The Empress of Japan's flag features a chrysanthemum design.\n"
                        "The Empress of Japan's flag has a white background.\n"
                        "The Empress of Japan's flag is in a square shape.")));
        auto claims = longwiki::extract_claims(prompt, response, client, "ext", testsupport::templates());
        REQUIRE(claims.size() == 3);
        CHECK(claims[0].text == "The Empress of Japan's flag features a chrysanthemum design.");
        CHECK(claims[0].prompt_id == "p");
        CHECK(claims[0].source_sentence == response);
        CHECK(claims[0].claim_id != claims[1].claim_id);
    }
    SUBCASE("empty response yields zero claims and zero extractor calls") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint("ext", {}, std::string("never used")));
        auto claims = longwiki::extract_claims(prompt, "", client, "ext", testsupport::templates());
        CHECK(claims.empty());
        CHECK(client.stats().network_calls.load() == 0);
    }
    SUBCASE("mock echoing N lines gives N claims in order") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint("ext", {}, std::string("c1\nc2\nc3\nc4")));
        auto claims = longwiki::extract_claims(prompt, "Single sentence here.", client, "ext",
                                               testsupport::templates());
        REQUIRE(claims.size() == 4);
        for (int i = 0; i < 4; ++i) CHECK(claims[i].text == "c" + std::to_string(i + 1));
    }
    SUBCASE("'No verifiable claim.' lines are dropped") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint("ext", {}, std::string("No verifiable claim.")));
        auto claims = longwiki::extract_claims(prompt, "Opinion only, allegedly.", client, "ext",
                                               testsupport::templates());
        CHECK(claims.empty());
    }
    SUBCASE("windows carry neighbouring sentences as context") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint(
            "ext", {testsupport::contains_rule("Snippet: First part. Second part. Third part.\n", "from-middle")},
            std::string("other")));
        auto claims = longwiki::extract_claims(prompt, "First part. Second part. Third part.", client, "ext",
                                               testsupport::templates());
        REQUIRE(claims.size() == 3);
        CHECK(claims[1].text == "from-middle");  // middle sentence sees both neighbours
    }
}

TEST_CASE("entity extraction strategies") {
    SUBCASE("heuristic capitalized-span scanner") {
        auto entities =
            longwiki::heuristic_entities("Describe the effects of Cyclone Bejisa on the island of Reunion.");
        CHECK(std::find(entities.begin(), entities.end(), "Cyclone Bejisa") != entities.end());
        CHECK(std::find(entities.begin(), entities.end(), "Reunion") != entities.end());
        CHECK(std::find(entities.begin(), entities.end(), "Describe") == entities.end());
    }
    SUBCASE("llm extraction parses a comma list and drops None") {
        llm::LlmClient client;
        client.register_endpoint(
            testsupport::mock_endpoint("ent", {}, std::string("Cyclone Bejisa, Reunion")));
        auto entities = longwiki::llm_entities("q", client, "ent", testsupport::templates());
        CHECK(entities == std::vector<std::string>{"Cyclone Bejisa", "Reunion"});
        llm::LlmClient none;
        none.register_endpoint(testsupport::mock_endpoint("ent", {}, std::string("None")));
        CHECK(longwiki::llm_entities("q", none, "ent", testsupport::templates()).empty());
    }
}

TEST_CASE("select_evidence") {
    // Fixture: two "Japan"-titled pages plus one unrelated page.
    std::vector<corpus::WikiPage> pages;
    auto add_page = [&](const std::string& id, const std::string& title, const std::string& body) {
        corpus::WikiPage p;
        p.page_id = id;
        p.title = title;
        p.body = body;
        pages.push_back(p);
    };
    add_page("seed", "Flag of Japan",
             "The imperial flag displays a chrysanthemum crest centered on crimson fabric. "
             "Court ceremonies fly the banner during enthronement rites.");
    add_page("jp", "Japan", "Japan is an island country with a long maritime history and many ports.");
    add_page("fr", "France", "France grows wheat and produces wine in temperate valleys.");
    corpus::PageStore store(std::move(pages));
    auto index = retrieval::RetrievalIndex::build_from_store(store);
    longwiki::EvidenceSelector selector(store, index);

    longwiki::LongWikiPrompt prompt;
    prompt.prompt_id = "seed:s0";
    prompt.page_id = "seed";
    prompt.prompt_text = "Describe the flag of Japan.";

    longwiki::Claim claim;
    claim.claim_id = "c0";
    claim.prompt_id = prompt.prompt_id;

    SUBCASE("claim wording matching a passage retrieves that passage first") {
        claim.text = "The imperial flag displays a chrysanthemum crest centered on crimson fabric.";
        auto ev = selector.select(claim, prompt, {"Japan"});
        REQUIRE_FALSE(ev.passages.empty());
        CHECK_FALSE(ev.fallback_whole_index);
        CHECK(ev.passages[0].page_id == "seed");
    }
    SUBCASE("no entities falls back to the whole index with the flag set") {
        claim.text = "wheat and wine production";
        auto ev = selector.select(claim, prompt, {});
        CHECK(ev.fallback_whole_index);
        REQUIRE_FALSE(ev.passages.empty());
    }
    SUBCASE("hand-computed overlap order on the scoped mini-index") {
        // claim shares {maritime, ports} with the Japan page, {chrysanthemum}
        // with the seed page body
        claim.text = "maritime ports chrysanthemum";
        auto ev = selector.select(claim, prompt, {"Japan"});
        REQUIRE(ev.passages.size() >= 2);
        std::set<std::string> ids;
        for (const auto& p : ev.passages) ids.insert(p.page_id);
        CHECK(ids.count("jp"));
        CHECK(ids.count("seed"));
        CHECK_FALSE(ids.count("fr"));  // out of scope
    }
    SUBCASE("evidence is capped at five passages") {
        claim.text = "chrysanthemum crest banner";
        auto ev = selector.select(claim, prompt, {"Japan", "France"});
        CHECK(ev.passages.size() <= 5);
    }
}

TEST_CASE("verify_claim") {
    longwiki::Claim claim;
    claim.claim_id = "c1";
    claim.prompt_id = "p";
    claim.text = "The flag features a chrysanthemum design.";
    longwiki::EvidenceSelection evidence;
    corpus::Passage p;
    p.page_id = "seed";
    p.page_title = "Flag of Japan";
    p.passage_index = 0;
    p.text = "The flag features a chrysanthemum design on crimson fabric.";
    p.token_count = 10;
    evidence.passages.push_back(p);

    SUBCASE("supporting evidence with a faithful judge") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint(
            "ver", {testsupport::contains_rule("chrysanthemum design on crimson", R"({"supported": true})")},
            std::string(R"({"supported": false})")));
        auto v = longwiki::verify_claim(claim, evidence, client, "ver", testsupport::templates());
        CHECK(v.supported);
        REQUIRE(v.evidence.size() == 1);
        CHECK(v.evidence[0].page_id == "seed");
    }
    SUBCASE("contradicting evidence judged unsupported") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint("ver", {}, std::string(R"({"supported": false})")));
        CHECK_FALSE(longwiki::verify_claim(claim, evidence, client, "ver", testsupport::templates()).supported);
    }
    SUBCASE("malformed verifier output twice counts as unsupported") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint("ver", {}, std::string("cannot tell")));
        auto v = longwiki::verify_claim(claim, evidence, client, "ver", testsupport::templates());
        CHECK_FALSE(v.supported);
        CHECK_FALSE(v.errored);
        CHECK(client.stats().verdict_sentinels.load() == 1);
    }
    SUBCASE("transport failure marks the claim errored") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint("ver", {}));  // no rule, no default
        auto v = longwiki::verify_claim(claim, evidence, client, "ver", testsupport::templates());
        CHECK(v.errored);
    }
    SUBCASE("more than five passages is a contract violation") {
        longwiki::EvidenceSelection six;
        for (int i = 0; i < 6; ++i) six.passages.push_back(p);
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint("ver", {}, std::string("x")));
        CHECK_THROWS_AS(longwiki::verify_claim(claim, six, client, "ver", testsupport::templates()),
                        std::runtime_error);
    }
}

namespace {

longwiki::PromptOutcome outcome(const std::string& id, bool refused, std::size_t s, std::size_t t,
                                bool errored = false) {
    longwiki::PromptOutcome o;
    o.prompt_id = id;
    o.refused = refused;
    o.supported = s;
    o.total = t;
    o.errored = errored;
    return o;
}

}  // namespace

TEST_CASE("longwiki score formulas") {
    SUBCASE("symmetric case S=16 T=32 K=32") {
        auto m = longwiki::score({outcome("a", false, 16, 32)}, 32);
        CHECK(m.precision.value == doctest::Approx(0.5));
        CHECK(m.recall_at_k.value == doctest::Approx(0.5));
        CHECK(m.f1_at_k.value == doctest::Approx(0.5));
    }
    SUBCASE("recall caps at 1: S=48 T=60 K=32") {
        auto m = longwiki::score({outcome("a", false, 48, 60)}, 32);
        CHECK(m.precision.value == doctest::Approx(0.8));
        CHECK(m.recall_at_k.value == doctest::Approx(1.0));
        CHECK(m.f1_at_k.value == doctest::Approx(2.0 * 0.8 * 1.0 / 1.8));  // 0.888...
    }
    SUBCASE("zero support zeroes all three") {
        auto m = longwiki::score({outcome("a", false, 0, 10)}, 32);
        CHECK(m.precision.value == 0.0);
        CHECK(m.recall_at_k.value == 0.0);
        CHECK(m.f1_at_k.value == 0.0);
    }
    SUBCASE("zero claims count as precision zero, not undefined") {
        auto m = longwiki::score({outcome("a", false, 0, 0)}, 32);
        CHECK(m.precision.defined);
        CHECK(m.precision.value == 0.0);
    }
    SUBCASE("S > T is a data integrity error") {
        CHECK_THROWS_AS(longwiki::score({outcome("a", false, 5, 3)}, 32), std::runtime_error);
    }
    SUBCASE("mean of per-prompt F1, not F1 of means") {
        // (P,R) = (1.0, 0.25) and (0.25, 1.0): per-prompt F1 = 0.4 each, mean 0.4;
        // F1 of the mean P/R (0.625, 0.625) would be 0.625.
        auto m = longwiki::score({outcome("a", false, 8, 8), outcome("b", false, 32, 128)}, 32);
        CHECK(m.precision.value == doctest::Approx(0.625));
        CHECK(m.recall_at_k.value == doctest::Approx(0.625));
        CHECK(m.f1_at_k.value == doctest::Approx(0.4));
    }
    SUBCASE("refused prompts feed FRR but not the metric means") {
        auto m = longwiki::score({outcome("a", true, 0, 0), outcome("b", false, 16, 32),
                                  outcome("c", false, 16, 32), outcome("d", true, 0, 0)},
                                 32);
        CHECK(m.false_refusal_rate.value == doctest::Approx(0.5));
        CHECK(m.precision.value == doctest::Approx(0.5));
        CHECK(m.n_prompts == 4);
        CHECK(m.per_prompt.size() == 2);
    }
    SUBCASE("errored prompts are excluded and counted") {
        auto m = longwiki::score({outcome("a", false, 1, 2), outcome("b", false, 0, 0, true)}, 32);
        CHECK(m.n_errored == 1);
        CHECK(m.per_prompt.size() == 1);
    }
}

TEST_CASE("longwiki score bounds and monotonicity properties") {
    SeededRng rng(31337);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t t = rng.uniform(80);
        std::size_t s = t == 0 ? 0 : rng.uniform(t + 1);
        auto m = longwiki::score({outcome("a", false, s, t)}, 32);
        const auto& ps = m.per_prompt[0];
        REQUIRE(ps.precision >= 0.0);
        REQUIRE(ps.precision <= 1.0);
        REQUIRE(ps.recall_at_k >= 0.0);
        REQUIRE(ps.recall_at_k <= 1.0);
        REQUIRE(ps.f1_at_k <= std::max(ps.precision, ps.recall_at_k) + 1e-12);
        REQUIRE((ps.f1_at_k == 0.0) == (s == 0));
        if (s < t) {  // monotone in S at fixed T
            auto m2 = longwiki::score({outcome("a", false, s + 1, t)}, 32);
            REQUIRE(m2.per_prompt[0].precision >= ps.precision);
            REQUIRE(m2.per_prompt[0].recall_at_k >= ps.recall_at_k);
            REQUIRE(m2.per_prompt[0].f1_at_k >= ps.f1_at_k);
        }
    }
}
