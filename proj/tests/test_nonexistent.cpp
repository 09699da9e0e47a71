#include "hallulens/nonexistent.hpp"

#include "hallulens/pipeline.hpp"
#include "hallulens/util.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

using namespace hallulens;

namespace {

std::filesystem::path write_temp(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& content) {
    auto p = dir / name;
    write_file_atomic(p, content);
    return p;
}

}  // namespace

TEST_CASE("load_name_db") {
    auto dir = testsupport::fresh_temp_dir("namedb");
    SUBCASE("taxonomic loader keeps only two-word species rows") {
        auto path = write_temp(dir, "species.txt",
                               "1|Nesomys narindaensis\n"
                               "2|Penapis lusitanica\n"
                               "3|Roncus basilice\n"
                               "4|Cheumatopsyche cingulatus\n"
                               "5|Koponeniella brandegeei\n"
                               "6|Nesomys narindaensis ssp minor\n"
                               "7|Single\n");
        auto db = nonexistent::NameDB::load(path, nonexistent::NameDomain::animal);
        CHECK(db.size() == 5);
        CHECK(db.skipped_rows() == 2);
        CHECK(db.contains("Nesomys narindaensis"));
        CHECK(db.contains("nesomys  NARINDAENSIS"));  // normalized membership
        CHECK_FALSE(db.contains("Nesomys lusitanica"));
    }
    SUBCASE("medicine loader keeps names verbatim") {
        auto path = write_temp(dir, "meds.csv", "name\nAcivir Cream\nTrixide-H Tablet\nFluster Dex Oil\n");
        auto db = nonexistent::NameDB::load(path, nonexistent::NameDomain::medicine);
        CHECK(db.size() == 3);
        CHECK(db.contains("Acivir Cream"));
    }
    SUBCASE("empty file is an error") {
        auto path = write_temp(dir, "empty.txt", "\n\n");
        CHECK_THROWS_AS(nonexistent::NameDB::load(path, nonexistent::NameDomain::animal), std::runtime_error);
    }
    SUBCASE("committed ITIS fixture loads at full size") {
        auto db = nonexistent::NameDB::load(testsupport::fixtures_dir() / "itis_species.txt",
                                            nonexistent::NameDomain::animal);
        CHECK(db.size() >= 5000);
        CHECK(db.contains("Nesomys narindaensis"));
        CHECK(db.skipped_rows() > 0);  // the ssp. rows
    }
}

TEST_CASE("mix_name") {
    auto dir = testsupport::fresh_temp_dir("mix");
    SUBCASE("two-record DB yields exactly the two cross combinations") {
        auto path = write_temp(dir, "two.txt", "1|Alpha xus\n2|Beta yus\n");
        auto db = nonexistent::NameDB::load(path, nonexistent::NameDomain::animal);
        SeededRng rng(5);
        std::set<std::string> seen;
        for (int i = 0; i < 50; ++i) {
            auto mixed = nonexistent::mix_name(db, rng);
            CHECK((mixed.name == "Alpha yus" || mixed.name == "Beta xus"));
            CHECK(mixed.genus != mixed.epithet_source_genus);
            CHECK_FALSE(db.contains(mixed.name));
            seen.insert(mixed.name);
        }
        CHECK(seen.size() == 2);
    }
    SUBCASE("DB where every cross-combination exists errors out") {
        // two genera sharing both epithets: all cross names are members
        auto path = write_temp(dir, "dense.txt", "1|Alpha xus\n2|Alpha yus\n3|Beta xus\n4|Beta yus\n");
        auto db = nonexistent::NameDB::load(path, nonexistent::NameDomain::animal);
        SeededRng rng(5);
        CHECK_THROWS_WITH_AS(nonexistent::mix_name(db, rng, 200), doctest::Contains("draw budget"),
                             std::runtime_error);
    }
    SUBCASE("medicine swap keeps the initial word and produces an absent name") {
        auto path = write_temp(dir, "meds.csv", "Altrex Forte Tablet\nBevacor Dex Oil\nCortalin Night Caplets\n");
        auto db = nonexistent::NameDB::load(path, nonexistent::NameDomain::medicine);
        SeededRng rng(9);
        for (int i = 0; i < 30; ++i) {
            auto mixed = nonexistent::mix_name(db, rng);
            CHECK_FALSE(db.contains(mixed.name));
            auto words = split(mixed.name, ' ');
            CHECK((words[0] == "Altrex" || words[0] == "Bevacor" || words[0] == "Cortalin"));
        }
    }
}

TEST_CASE("generate_mixed_set") {
    auto db = nonexistent::NameDB::load(testsupport::fixtures_dir() / "itis_species.txt",
                                        nonexistent::NameDomain::animal);
    SUBCASE("seeded determinism and pairwise-distinct names") {
        auto a = nonexistent::generate_mixed_set(db, 3, 1234);
        auto b = nonexistent::generate_mixed_set(db, 3, 1234);
        REQUIRE(a.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].name == b[i].name);
        auto big = nonexistent::generate_mixed_set(db, 500, 99);
        std::set<std::string> names;
        for (const auto& e : big) {
            CHECK(e.verified_absent);
            CHECK(e.subtask == nonexistent::Subtask::mixed);
            CHECK(e.type == "animal");
            names.insert(normalize_name(e.name));
        }
        CHECK(names.size() == 500);
    }
    SUBCASE("paper-scale per-domain default is 2,000 x 4 domains") {
        CHECK(pipeline::MixedConfig{}.n_per_domain == 2000);
        CHECK(pipeline::MixedConfig{}.domains.size() == 4);
        auto set = nonexistent::generate_mixed_set(db, 2000, 7);
        CHECK(set.size() == 2000);
    }
}

TEST_CASE("verify_nonexistence with the offline denylist stub") {
    auto dir = testsupport::fresh_temp_dir("deny");
    SUBCASE("empty denylist verifies anything") {
        auto path = write_temp(dir, "deny.txt", "");
        nonexistent::DenylistSearchClient stub(path);
        CHECK(nonexistent::verify_nonexistence("Quiet Harbor Tea House", stub));
    }
    SUBCASE("denylisted name fails verification") {
        auto path = write_temp(dir, "deny.txt", "Storyhouse\n");
        nonexistent::DenylistSearchClient stub(path);
        CHECK_FALSE(nonexistent::verify_nonexistence("Storyhouse", stub));
        CHECK(nonexistent::verify_nonexistence("Bookhaven", stub));
    }
    SUBCASE("transport failure skips the candidate and counts") {
        struct FlakySearch : nonexistent::SearchClient {
            std::optional<bool> exists(const std::string&) override { return std::nullopt; }
        } flaky;
        std::size_t failures = 0;
        CHECK_FALSE(nonexistent::verify_nonexistence("anything", flaky, &failures));
        CHECK(failures == 1);
    }
}

TEST_CASE("place terciles split 1..9 into three groups of three") {
    auto dir = testsupport::fresh_temp_dir("places");
    std::string csv = "name,kind,ngram_frequency\n";
    for (int i = 1; i <= 9; ++i) csv += "City" + std::to_string(i) + ",city," + std::to_string(i) + "\n";
    auto places = nonexistent::load_places(write_temp(dir, "places.csv", csv));
    REQUIRE(places.size() == 9);
    for (const auto& p : places) {
        int f = static_cast<int>(p.ngram_frequency);
        nonexistent::PlaceFrequency expect = f <= 3   ? nonexistent::PlaceFrequency::low
                                             : f <= 6 ? nonexistent::PlaceFrequency::mid
                                                      : nonexistent::PlaceFrequency::high;
        CHECK(p.group == expect);
    }
    SUBCASE("shipped place file: 90 cities and 90 countries in terciles of 30") {
        auto shipped = nonexistent::load_places(testsupport::data_dir() / "places.csv");
        std::map<std::pair<std::string, nonexistent::PlaceFrequency>, int> counts;
        for (const auto& p : shipped) counts[{p.kind, p.group}]++;
        for (const std::string& kind : {"city", "country"}) {
            CHECK(counts[{kind, nonexistent::PlaceFrequency::low}] == 30);
            CHECK(counts[{kind, nonexistent::PlaceFrequency::mid}] == 30);
            CHECK(counts[{kind, nonexistent::PlaceFrequency::high}] == 30);
        }
    }
}

TEST_CASE("generate_entity_candidates runs the A/B/combiner round") {
    llm::LlmClient client;
    client.register_endpoint(testsupport::mock_endpoint("a", {}, std::string("X1, X2")));
    client.register_endpoint(testsupport::mock_endpoint("b", {}, std::string("Y1, Y2")));
    SUBCASE("combiner output is parsed on commas") {
        client.register_endpoint(testsupport::mock_endpoint("c", {}, std::string("X1 Y2, Y1 X2")));
        auto names = nonexistent::generate_entity_candidates({"business", "restaurant", "Hong Kong"}, client,
                                                             "a", "b", "c", testsupport::templates(), 2);
        CHECK(names == std::vector<std::string>{"X1 Y2", "Y1 X2"});
    }
    SUBCASE("duplicates from the combiner are removed") {
        client.register_endpoint(testsupport::mock_endpoint("c", {}, std::string("Same Name, Same Name, Other")));
        auto names = nonexistent::generate_entity_candidates({"business", "cafe", "Lima"}, client, "a", "b",
                                                             "c", testsupport::templates(), 3);
        CHECK(names == std::vector<std::string>{"Same Name", "Other"});
    }
    SUBCASE("the business brainstorm prompt carries TYPE and PLACE") {
        llm::LlmClient probing;
        probing.register_endpoint(testsupport::mock_endpoint(
            "a", {testsupport::contains_rule("new restaurant in Hong Kong", "Hit A")}));
        probing.register_endpoint(testsupport::mock_endpoint("b", {}, std::string("B1")));
        probing.register_endpoint(testsupport::mock_endpoint(
            "c", {testsupport::contains_rule("List A: Hit A", "Combined")}));
        auto names = nonexistent::generate_entity_candidates({"business", "restaurant", "Hong Kong"}, probing,
                                                             "a", "b", "c", testsupport::templates(), 1);
        CHECK(names == std::vector<std::string>{"Combined"});
    }
    SUBCASE("persistently empty generator output is an error") {
        client.register_endpoint(testsupport::mock_endpoint("empty", {}, std::string("   ")));
        CHECK_THROWS_WITH_AS(
            nonexistent::generate_entity_candidates({"business", "bar", "Accra"}, client, "empty", "b", "a",
                                                    testsupport::templates(), 2),
            doctest::Contains("returned no names"), std::runtime_error);
    }
}

namespace {

nonexistent::GeneratedSetConfig small_generated_config(const std::filesystem::path& dir) {
    nonexistent::GeneratedSetConfig gc;
    gc.generator_endpoints = {"gen0", "gen1", "gen2"};
    gc.n_business = 6;
    gc.n_event = 4;
    gc.n_product = 2;
    gc.sets = 3;
    gc.names_per_combo = 3;
    gc.places_per_group = 2;
    gc.business_types = {"restaurant", "cafe"};
    gc.event_types = {"festival"};
    gc.product_types = {"headphones", "camera"};
    std::string csv = "name,kind,ngram_frequency\n";
    for (int i = 1; i <= 9; ++i) csv += "City" + std::to_string(i) + ",city," + std::to_string(i * 10) + "\n";
    for (int i = 1; i <= 9; ++i)
        csv += "Country" + std::to_string(i) + ",country," + std::to_string(i * 100) + "\n";
    auto path = dir / "places.csv";
    write_file_atomic(path, csv);
    gc.places = nonexistent::load_places(path);
    gc.workers = 4;
    return gc;
}

void setup_round_robin(llm::LlmClient& client) {
    for (int g = 0; g < 3; ++g) {
        client.register_endpoint(testsupport::mock_endpoint(
            "gen" + std::to_string(g), {},
            std::string("Name g") + std::to_string(g) + "-{PROMPT_SHA8}a, Name g" + std::to_string(g) +
                "-{PROMPT_SHA8}b, Name g" + std::to_string(g) + "-{PROMPT_SHA8}c"));
    }
}

}  // namespace

TEST_CASE("build_generated_set fills quotas with rotating combiner roles") {
    auto dir = testsupport::fresh_temp_dir("genset");
    auto gc = small_generated_config(dir);
    llm::LlmClient client;
    setup_round_robin(client);
    nonexistent::DenylistSearchClient stub;  // empty denylist: everything verifies
    auto result = nonexistent::build_generated_set(gc, client, testsupport::templates(), stub, 4242);

    CHECK(result.entities.size() == 3 * (6 + 4 + 2));
    CHECK(result.combiner_by_set == std::vector<std::string>{"gen0", "gen1", "gen2"});

    std::map<std::string, int> by_kind_set;
    std::set<std::string> names;
    for (const auto& e : result.entities) {
        CHECK(e.verified_absent);
        CHECK(e.subtask == nonexistent::Subtask::generated);
        CHECK(names.insert(normalize_name(e.name)).second);  // globally distinct
        std::string set_id = e.entity_id.substr(0, e.entity_id.find('-', 4));
        by_kind_set[set_id]++;
        if (e.type == "festival") {
            REQUIRE(e.place.has_value());
            CHECK(e.place->rfind("Country", 0) == 0);
            CHECK(e.place_frequency_group.has_value());
        }
        if (e.type == "headphones" || e.type == "camera") {
            CHECK_FALSE(e.place.has_value());
            CHECK_FALSE(e.place_frequency_group.has_value());
        }
    }
    SUBCASE("provenance strings rotate with the set index") {
        std::set<std::string> provs;
        for (const auto& e : result.entities) provs.insert(e.generator_provenance);
        CHECK(provs == std::set<std::string>{"gen1+gen2>gen0", "gen2+gen0>gen1", "gen0+gen1>gen2"});
    }
    SUBCASE("determinism under the same seed") {
        llm::LlmClient c2;
        setup_round_robin(c2);
        nonexistent::DenylistSearchClient stub2;
        auto again = nonexistent::build_generated_set(gc, c2, testsupport::templates(), stub2, 4242);
        CHECK(pipeline::dump_jsonl(result.entities) == pipeline::dump_jsonl(again.entities));
    }
    SUBCASE("shortfall names the kind") {
        auto starved = gc;
        starved.product_types = {};
        llm::LlmClient c3;
        setup_round_robin(c3);
        nonexistent::DenylistSearchClient stub3;
        CHECK_THROWS_WITH_AS(
            nonexistent::build_generated_set(starved, c3, testsupport::templates(), stub3, 1),
            doctest::Contains("product"), std::runtime_error);
    }
}

TEST_CASE("render_inference_prompt") {
    const auto& lib = testsupport::templates();
    nonexistent::NonexistentEntity animal;
    animal.entity_id = "mx-animal-0";
    animal.type = "animal";
    animal.name = "Penapis lusitanica";

    SUBCASE("index 0 without place") {
        CHECK(nonexistent::render_inference_prompt(animal, 0, lib) ==
              "What can you tell me about animal called Penapis lusitanica?");
    }
    SUBCASE("placed business renders ' in {place}'") {
        nonexistent::NonexistentEntity shop;
        shop.entity_id = "gen-0-business-0";
        shop.type = "bookstore";
        shop.name = "Storyhouse";
        shop.place = "Hong Kong";
        CHECK(nonexistent::render_inference_prompt(shop, 1, lib) ==
              "I'm looking for information on bookstore in Hong Kong named Storyhouse.");
    }
    SUBCASE("template choice is deterministic per entity and seed") {
        auto i1 = nonexistent::pick_template_index(animal, 99, lib.inference_variant_count());
        auto i2 = nonexistent::pick_template_index(animal, 99, lib.inference_variant_count());
        CHECK(i1 == i2);
        CHECK(i1 < 10);
        // across many entities the draw covers several variants
        std::set<std::size_t> seen;
        for (int k = 0; k < 40; ++k) {
            nonexistent::NonexistentEntity e = animal;
            e.entity_id = "mx-animal-" + std::to_string(k);
            seen.insert(nonexistent::pick_template_index(e, 99, lib.inference_variant_count()));
        }
        CHECK(seen.size() >= 4);
    }
}

TEST_CASE("judge_belief routes to the domain template and applies the pessimistic sentinel") {
    nonexistent::NonexistentEntity species;
    species.entity_id = "mx-animal-1";
    species.subtask = nonexistent::Subtask::mixed;
    species.type = "animal";
    species.name = "Roncus basilice";

    SUBCASE("refusal-shaped generation judged not-believing") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint(
            "judge", {testsupport::contains_rule("I couldn't find any specific information",
                                                 R"({"does_believe": false})")},
            std::string(R"({"does_believe": true})")));
        auto v = nonexistent::judge_belief(species, "I couldn't find any specific information on that.",
                                           client, "judge", testsupport::templates());
        CHECK_FALSE(v.does_believe);
    }
    SUBCASE("confident description judged believing") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint(
            "judge", {testsupport::contains_rule("is a species of caddisfly", R"({"does_believe": true})")},
            std::string(R"({"does_believe": false})")));
        auto v = nonexistent::judge_belief(species, "Roncus basilice is a species of caddisfly.", client,
                                           "judge", testsupport::templates());
        CHECK(v.does_believe);
    }
    SUBCASE("malformed judge output twice defaults to believing") {
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint("judge", {}, std::string("unsure")));
        auto v = nonexistent::judge_belief(species, "text", client, "judge", testsupport::templates());
        CHECK(v.does_believe);
        CHECK_FALSE(v.errored);
    }
    SUBCASE("medicine entities use the medicine template") {
        nonexistent::NonexistentEntity med;
        med.entity_id = "mx-medicine-1";
        med.subtask = nonexistent::Subtask::mixed;
        med.type = "medicine";
        med.name = "Altrex Dex Tablet";
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint(
            "judge",
            {testsupport::contains_rule("a medicine named Altrex Dex Tablet", R"({"does_believe": false})")}));
        auto v = nonexistent::judge_belief(med, "Never heard of it.", client, "judge", testsupport::templates());
        CHECK_FALSE(v.does_believe);
    }
    SUBCASE("generated entities use the generic template with their type") {
        nonexistent::NonexistentEntity shop;
        shop.entity_id = "gen-0-business-3";
        shop.subtask = nonexistent::Subtask::generated;
        shop.type = "bookstore";
        shop.name = "Storyhouse";
        llm::LlmClient client;
        client.register_endpoint(testsupport::mock_endpoint(
            "judge", {testsupport::contains_rule("about bookstore named Storyhouse", R"({"does_believe": true})")}));
        auto v = nonexistent::judge_belief(shop, "It is a lovely shop.", client, "judge",
                                           testsupport::templates());
        CHECK(v.does_believe);
    }
}

namespace {

nonexistent::NonexistentEntity entity_for(const std::string& id, nonexistent::Subtask subtask,
                                          const std::string& type) {
    nonexistent::NonexistentEntity e;
    e.entity_id = id;
    e.subtask = subtask;
    e.type = type;
    e.name = id;
    e.verified_absent = true;
    return e;
}

}  // namespace

TEST_CASE("nonexistent score") {
    SUBCASE("4 verdicts with 1 believed -> 0.25") {
        std::vector<nonexistent::NonexistentEntity> entities;
        std::vector<nonexistent::BeliefVerdict> verdicts;
        for (int i = 0; i < 4; ++i) {
            entities.push_back(entity_for("e" + std::to_string(i), nonexistent::Subtask::mixed, "animal"));
            verdicts.push_back({"e" + std::to_string(i), i == 0, "", false, ""});
        }
        auto m = nonexistent::score(entities, verdicts);
        CHECK(m.overall_rate.value == doctest::Approx(0.25));
    }
    SUBCASE("per-domain fixture: animal 2/4, plant 0/2") {
        std::vector<nonexistent::NonexistentEntity> entities;
        std::vector<nonexistent::BeliefVerdict> verdicts;
        for (int i = 0; i < 4; ++i) {
            entities.push_back(entity_for("a" + std::to_string(i), nonexistent::Subtask::mixed, "animal"));
            verdicts.push_back({"a" + std::to_string(i), i < 2, "", false, ""});
        }
        for (int i = 0; i < 2; ++i) {
            entities.push_back(entity_for("p" + std::to_string(i), nonexistent::Subtask::mixed, "plant"));
            verdicts.push_back({"p" + std::to_string(i), false, "", false, ""});
        }
        auto m = nonexistent::score(entities, verdicts);
        CHECK(m.overall_rate.value == doctest::Approx(2.0 / 6.0));
        CHECK(m.per_domain.at("animal").value == doctest::Approx(0.5));
        CHECK(m.per_domain.at("plant").value == doctest::Approx(0.0));
    }
    SUBCASE("average column is the macro mean of the two subtasks") {
        std::vector<nonexistent::NonexistentEntity> entities;
        std::vector<nonexistent::BeliefVerdict> verdicts;
        for (int i = 0; i < 10; ++i) {
            entities.push_back(entity_for("m" + std::to_string(i), nonexistent::Subtask::mixed, "animal"));
            verdicts.push_back({"m" + std::to_string(i), i < 3, "", false, ""});  // 0.3
        }
        for (int i = 0; i < 5; ++i) {
            entities.push_back(entity_for("g" + std::to_string(i), nonexistent::Subtask::generated, "cafe"));
            verdicts.push_back({"g" + std::to_string(i), i < 1, "", false, ""});  // 0.2
        }
        auto m = nonexistent::score(entities, verdicts);
        CHECK(m.mixed_rate.value == doctest::Approx(0.3));
        CHECK(m.generated_rate.value == doctest::Approx(0.2));
        CHECK(m.average_rate.value == doctest::Approx(0.25));
        CHECK(m.average_rate.value ==
              doctest::Approx((m.mixed_rate.value + m.generated_rate.value) / 2.0));
    }
    SUBCASE("place-frequency breakdown covers generated entities") {
        std::vector<nonexistent::NonexistentEntity> entities;
        std::vector<nonexistent::BeliefVerdict> verdicts;
        int i = 0;
        for (auto group : {nonexistent::PlaceFrequency::low, nonexistent::PlaceFrequency::mid,
                           nonexistent::PlaceFrequency::high}) {
            for (int k = 0; k < 2; ++k, ++i) {
                auto e = entity_for("g" + std::to_string(i), nonexistent::Subtask::generated, "cafe");
                e.place = "Somewhere";
                e.place_frequency_group = group;
                entities.push_back(e);
                verdicts.push_back({e.entity_id, group == nonexistent::PlaceFrequency::mid, "", false, ""});
            }
        }
        auto m = nonexistent::score(entities, verdicts);
        CHECK(m.per_place_frequency.at("mid").value == doctest::Approx(1.0));
        CHECK(m.per_place_frequency.at("low").value == doctest::Approx(0.0));
        CHECK(m.per_place_frequency.at("high").value == doctest::Approx(0.0));
    }
    SUBCASE("empty verdicts error") {
        CHECK_THROWS_AS(nonexistent::score({}, {}), std::runtime_error);
    }
    SUBCASE("errored verdicts are excluded and counted") {
        std::vector<nonexistent::NonexistentEntity> entities{
            entity_for("a", nonexistent::Subtask::mixed, "animal"),
            entity_for("b", nonexistent::Subtask::mixed, "animal")};
        std::vector<nonexistent::BeliefVerdict> verdicts{{"a", true, "", false, ""},
                                                         {"b", false, "", true, "transport"}};
        auto m = nonexistent::score(entities, verdicts);
        CHECK(m.n_total == 1);
        CHECK(m.n_errored == 1);
        CHECK(m.overall_rate.value == doctest::Approx(1.0));
    }
}
