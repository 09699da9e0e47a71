#include "hallulens/retrieval.hpp"

#include "hallulens/tokenize.hpp"
#include "hallulens/util.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

using namespace hallulens;

namespace {

corpus::Passage make_passage(std::string page, std::size_t idx, std::string text) {
    corpus::Passage p;
    p.page_id = std::move(page);
    p.page_title = p.page_id;
    p.passage_index = idx;
    p.text = std::move(text);
    p.token_count = count_whitespace_tokens(p.text);
    return p;
}

}  // namespace

TEST_CASE("search ranks by lexical overlap with deterministic ties") {
    std::vector<corpus::Passage> passages{
        make_passage("A", 0, "solar panels convert sunlight into electricity"),
        make_passage("B", 0, "wind turbines convert motion energy"),
        make_passage("C", 0, "volcanic rock forms from cooled lava"),
    };
    auto index = retrieval::RetrievalIndex::build(passages);

    SUBCASE("two shared terms beat one; zero overlap is dropped") {
        // query shares {convert, sunlight} with A, {convert} with B, nothing with C
        auto hits = index.search("convert sunlight", 10);
        REQUIRE(hits.size() == 2);
        CHECK(hits[0].passage->page_id == "A");
        CHECK(hits[1].passage->page_id == "B");
        CHECK(hits[0].score > hits[1].score);
    }
    SUBCASE("no term overlap yields empty result") {
        CHECK(index.search("quantum entanglement", 5).empty());
    }
    SUBCASE("empty query yields empty result") {
        CHECK(index.search("", 5).empty());
        CHECK(index.search("   ", 5).empty());
    }
    SUBCASE("self retrieval ranks the passage first with score 1") {
        for (const auto& p : index.passages()) {
            auto hits = index.search(p.text, 1);
            REQUIRE(hits.size() == 1);
            CHECK(hits[0].passage->page_id == p.page_id);
            CHECK(hits[0].score == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("parallel and serial search agree bit for bit") {
    corpus::PageStore store = testsupport::synthetic_store(70, 4);
    auto index = retrieval::RetrievalIndex::build_from_store(store, 32);
    REQUIRE(index.passages().size() > 256);  // enough to trigger the parallel path
    std::vector<std::string> queries{"river valley harvest", "marker3x1 lighthouse", "uniquetok7",
                                     "aqueduct temple market causeway", "windmill"};
    for (const auto& p : index.passages()) {
        if (p.passage_index == 0) queries.push_back(p.text);
        if (queries.size() > 40) break;
    }
    for (const std::string& q : queries) {
        auto par = index.search(q, 7);
        auto ser = index.search_serial(q, 7);
        REQUIRE(par.size() == ser.size());
        for (std::size_t i = 0; i < par.size(); ++i) {
            CHECK(par[i].passage == ser[i].passage);
            CHECK(par[i].score == ser[i].score);  // bitwise
        }
    }
}

TEST_CASE("self-retrieval holds across a whole synthetic corpus") {
    corpus::PageStore store = testsupport::synthetic_store(60, 3);
    auto index = retrieval::RetrievalIndex::build_from_store(store, 24);
    for (const auto& p : index.passages()) {
        auto hits = index.search(p.text, 1);
        REQUIRE(hits.size() == 1);
        CHECK(hits[0].passage->page_id == p.page_id);
        CHECK(hits[0].passage->passage_index == p.passage_index);
    }
}

TEST_CASE("index serialization round-trips") {
    auto dir = testsupport::fresh_temp_dir("index");
    corpus::PageStore store = testsupport::synthetic_store(10);
    auto index = retrieval::RetrievalIndex::build_from_store(store);
    auto path = dir / "index.bin";
    index.save(path);
    auto loaded = retrieval::RetrievalIndex::load(path);
    REQUIRE(loaded.passages().size() == index.passages().size());
    auto a = index.search("river valley harvest festival", 5);
    auto b = loaded.search("river valley harvest festival", 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].passage->page_id == b[i].passage->page_id);
        CHECK(a[i].score == b[i].score);
    }
    SUBCASE("foreign file rejected") {
        write_file_atomic(dir / "junk.bin", "not an index at all");
        CHECK_THROWS_AS(retrieval::RetrievalIndex::load(dir / "junk.bin"), std::runtime_error);
    }
}

TEST_CASE("bm25 scoring model is available behind the same interface") {
    std::vector<corpus::Passage> passages{
        make_passage("A", 0, "alpha beta gamma"),
        make_passage("B", 0, "alpha alpha beta beta delta epsilon zeta eta theta iota"),
    };
    auto index = retrieval::RetrievalIndex::build(passages, retrieval::make_bm25());
    auto hits = index.search("alpha", 2);
    REQUIRE(hits.size() == 2);  // both contain the term; ranking model-specific
}
