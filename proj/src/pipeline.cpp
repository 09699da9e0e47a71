#include "hallulens/pipeline.hpp"

#include "hallulens/tokenize.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>

namespace hallulens::pipeline {

using nlohmann::json;

namespace {

llm::Endpoint endpoint_from_json(const json& j) {
    llm::Endpoint ep;
    ep.name = j.at("name");
    ep.model_id = j.value("model_id", ep.name);
    ep.base_url = j.value("base_url", "");
    ep.api_key_env = j.value("api_key_env", "");
    ep.concurrency_limit = j.value("concurrency_limit", 4);
    std::string backend = j.value("backend", "http");
    if (backend == "mock") {
        ep.backend = llm::Endpoint::Backend::mock;
        for (const auto& r : j.value("rules", json::array())) {
            llm::MockRule rule;
            std::string match = r.value("match", "contains");
            rule.match = match == "exact"   ? llm::MockRule::Match::exact
                         : match == "regex" ? llm::MockRule::Match::regex
                                            : llm::MockRule::Match::contains;
            rule.pattern = r.at("pattern");
            rule.reply = r.at("reply");
            ep.mock_rules.push_back(std::move(rule));
        }
        if (j.contains("default_reply")) ep.mock_default_reply = j["default_reply"].get<std::string>();
    } else if (backend == "http") {
        ep.backend = llm::Endpoint::Backend::http;
    } else {
        throw std::runtime_error("endpoint " + ep.name + ": unknown backend '" + backend + "'");
    }
    return ep;
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    json j = json::parse(read_file(path));
    RunConfig c;
    c.master_seed = j.value("master_seed", 0ULL);
    c.run_id = j.value("run_id", "run-" + std::to_string(c.master_seed));
    c.artifacts_dir = j.value("artifacts_dir", std::string("runs"));
    c.cache_dir = j.value("cache_dir", std::string(""));
    c.prompts_dir = j.value("prompts_dir", std::string("prompts"));
    c.trials = j.value("trials", 3);
    c.workers = j.value("workers", 8);

    if (j.contains("corpus")) {
        const json& jc = j["corpus"];
        c.corpus.archive = jc.value("archive", std::string(""));
        c.corpus.centrality = jc.value("centrality", std::string(""));
        c.corpus.store_cache = jc.value("store_cache", std::string(""));
        c.corpus.n_bins = jc.value("n_bins", 10);
    }
    for (const auto& je : j.value("endpoints", json::array())) c.endpoints.push_back(endpoint_from_json(je));

    if (j.contains("roles")) {
        const json& jr = j["roles"];
        c.roles.tested = jr.value("tested", "");
        c.roles.qgen = jr.value("qgen", "");
        c.roles.answerability = jr.value("answerability", c.roles.qgen);
        c.roles.abstention_judge = jr.value("abstention_judge", "");
        c.roles.correctness_judge = jr.value("correctness_judge", c.roles.abstention_judge);
        c.roles.extractor = jr.value("extractor", "");
        c.roles.verifier = jr.value("verifier", "");
        c.roles.belief_judge = jr.value("belief_judge", c.roles.abstention_judge);
        if (jr.contains("entity_extractor"))
            c.roles.entity_extractor = jr["entity_extractor"].get<std::string>();
        for (const auto& g : jr.value("entity_generators", json::array()))
            c.roles.entity_generators.push_back(g.get<std::string>());
    }

    if (j.contains("precisewikiqa")) {
        const json& jp = j["precisewikiqa"];
        c.precise.per_bin = jp.value("per_bin", 500);
        c.precise.max_retries = jp.value("max_retries", 3);
        c.precise.infer_max_tokens = jp.value("infer_max_tokens", 256);
    }
    if (j.contains("longwiki")) {
        const json& jl = j["longwiki"];
        c.longwiki.per_level = jl.value("per_level", 50);
        if (jl.contains("levels")) {
            c.longwiki.levels.clear();
            for (const auto& l : jl["levels"]) c.longwiki.levels.insert(l.get<int>());
        }
        c.longwiki.k = jl.value("k", 32);
        c.longwiki.context_sentences = jl.value("context_sentences", 1);
        c.longwiki.infer_max_tokens = jl.value("infer_max_tokens", 1024);
        c.longwiki.scope_cap = jl.value("scope_cap", 50);
    }
    if (j.contains("nonexistent")) {
        const json& jn = j["nonexistent"];
        c.nonexistent.offline = jn.value("offline", true);
        c.nonexistent.denylist = jn.value("denylist", std::string(""));
        c.nonexistent.search_base_url = jn.value("search_base_url", "");
        c.nonexistent.search_api_key_env = jn.value("search_api_key_env", "");
        if (jn.contains("mixed")) {
            const json& jm = jn["mixed"];
            c.nonexistent.mixed.n_per_domain = jm.value("n_per_domain", 2000);
            if (jm.contains("domains")) {
                c.nonexistent.mixed.domains.clear();
                for (const auto& d : jm["domains"]) c.nonexistent.mixed.domains.push_back(d.get<std::string>());
            }
            json name_files = jm.value("name_files", json::object());
            for (const auto& [domain, file] : name_files.items())
                c.nonexistent.mixed.name_files[domain] = file.get<std::string>();
        }
        if (jn.contains("generated")) {
            const json& jg = jn["generated"];
            auto& g = c.nonexistent.generated;
            g.n_business = jg.value("n_business", 300);
            g.n_event = jg.value("n_event", 300);
            g.n_product = jg.value("n_product", 50);
            g.sets = jg.value("sets", 3);
            g.names_per_combo = jg.value("names_per_combo", 5);
            g.places_per_group = jg.value("places_per_group", 30);
            g.places_file = jg.value("places", std::string(""));
            g.business_types_file = jg.value("business_types", std::string(""));
            g.event_types_file = jg.value("event_types", std::string(""));
            g.product_types_file = jg.value("product_types", std::string(""));
        }
    }
    return c;
}

std::vector<std::string> RunConfig::validate() const {
    std::vector<std::string> errors;
    std::set<std::string> names;
    for (const llm::Endpoint& ep : endpoints) {
        if (!names.insert(ep.name).second) errors.push_back("endpoint defined twice: " + ep.name);
        if (ep.backend == llm::Endpoint::Backend::http && ep.base_url.empty())
            errors.push_back("endpoint " + ep.name + ": http backend needs base_url");
    }
    auto check_role = [&](const std::string& role, const std::string& name) {
        if (name.empty()) errors.push_back("roles." + role + " is not set");
        else if (!names.count(name)) errors.push_back("roles." + role + ": unknown endpoint '" + name + "'");
    };
    check_role("tested", roles.tested);
    check_role("qgen", roles.qgen);
    check_role("answerability", roles.answerability);
    check_role("abstention_judge", roles.abstention_judge);
    check_role("correctness_judge", roles.correctness_judge);
    check_role("extractor", roles.extractor);
    check_role("verifier", roles.verifier);
    check_role("belief_judge", roles.belief_judge);
    if (roles.entity_extractor) check_role("entity_extractor", *roles.entity_extractor);
    if (roles.entity_generators.size() != 3) {
        errors.push_back("roles.entity_generators must list exactly 3 endpoints");
    } else {
        for (const std::string& g : roles.entity_generators)
            if (!names.count(g)) errors.push_back("roles.entity_generators: unknown endpoint '" + g + "'");
    }
    if (trials < 1) errors.push_back("trials must be >= 1");
    if (longwiki.k <= 0) errors.push_back("longwiki.k must be positive");
    return errors;
}

bool stage_is_fresh(const std::filesystem::path& path) {
    std::filesystem::path marker = path;
    marker += ".done";
    if (!std::filesystem::exists(path) || !std::filesystem::exists(marker)) return false;
    try {
        return trim(read_file(marker)) == sha256_file_hex(path);
    } catch (const std::exception&) {
        return false;
    }
}

void commit_stage(const std::filesystem::path& path, std::string_view content) {
    write_file_atomic(path, content);
    std::filesystem::path marker = path;
    marker += ".done";
    write_file_atomic(marker, sha256_hex(content) + "\n");
}

corpus::PageStore prepare_corpus(const CorpusConfig& config, std::ostream& log) {
    if (!config.store_cache.empty() && std::filesystem::exists(config.store_cache)) {
        try {
            corpus::PageStore store = corpus::PageStore::load(config.store_cache);
            if (store.bins_assigned()) {
                log << "[corpus] loaded cached page store (" << store.size() << " pages)\n";
                return store;
            }
        } catch (const std::exception& e) {
            log << "[corpus] cache rejected: " << e.what() << "\n";
        }
    }
    corpus::PageStore store = corpus::ingest_corpus(config.archive, config.centrality);
    corpus::assign_bins(store, config.n_bins);
    if (!config.store_cache.empty()) {
        std::filesystem::create_directories(config.store_cache.parent_path());
        store.save(config.store_cache);
    }
    log << "[corpus] ingested " << store.size() << " pages into " << config.n_bins << " bins\n";
    return store;
}

Runner::Runner(RunConfig config, std::ostream& log)
    : config_(std::move(config)),
      log_(log),
      client_(llm::LlmClient::Options{.cache_dir = config_.cache_dir}),
      templates_(llm::TemplateLibrary::load(config_.prompts_dir)) {
    for (const llm::Endpoint& ep : config_.endpoints) client_.register_endpoint(ep);
}

namespace {

json trial_report(const std::string& task, int trial, std::uint64_t seed, const RunConfig& config,
                  const llm::TemplateLibrary& templates, const json& metrics_json) {
    json endpoints = json::object();
    auto add = [&](const std::string& role, const std::string& name) {
        if (!name.empty()) endpoints[role] = name;
    };
    add("tested", config.roles.tested);
    add("qgen", config.roles.qgen);
    add("answerability", config.roles.answerability);
    add("abstention_judge", config.roles.abstention_judge);
    add("correctness_judge", config.roles.correctness_judge);
    add("extractor", config.roles.extractor);
    add("verifier", config.roles.verifier);
    add("belief_judge", config.roles.belief_judge);
    json digests = json::object();
    for (const auto& [id, digest] : templates.digests()) digests[id] = digest;
    return json{{"task", task},       {"trial", trial},   {"seed", seed},
                {"endpoints", endpoints}, {"metrics", metrics_json}, {"template_digests", digests}};
}

}  // namespace

metrics::MetricMap Runner::run_precise_trial(const corpus::PageStore& store, int trial,
                                             const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::uint64_t seed = derive_seed(config_.master_seed, "precise", static_cast<std::uint64_t>(trial));
    const Roles& roles = config_.roles;

    const auto items_path = dir / "items.jsonl";
    std::vector<precise::QAItem> items;
    if (stage_is_fresh(items_path)) {
        items = load_jsonl<precise::QAItem>(items_path);
        log_ << "[precise t" << trial << "] items: reused " << items.size() << "\n";
    } else {
        precise::GenOptions gen;
        gen.per_bin = config_.precise.per_bin;
        gen.max_retries = config_.precise.max_retries;
        gen.workers = config_.workers;
        precise::QAGenResult result =
            precise::generate_test_set(store, client_, roles.qgen, roles.answerability, templates_, gen, seed);
        items = std::move(result.items);
        commit_stage(items_path, dump_jsonl(items));
        log_ << "[precise t" << trial << "] items: " << items.size() << " generated, "
             << result.rejections.size() << " rejected\n";
    }

    const auto responses_path = dir / "responses.jsonl";
    std::vector<precise::ResponseRecord> responses;
    if (stage_is_fresh(responses_path)) {
        responses = load_jsonl<precise::ResponseRecord>(responses_path);
    } else {
        llm::GenerationParams params;
        params.max_tokens = config_.precise.infer_max_tokens;
        responses = precise::run_inference(items, client_, roles.tested, params, config_.workers);
        commit_stage(responses_path, dump_jsonl(responses));
    }

    const auto refusal_path = dir / "refusal_verdicts.jsonl";
    const auto correctness_path = dir / "correctness_verdicts.jsonl";
    std::vector<precise::RefusalVerdict> refusals;
    std::vector<precise::CorrectnessVerdict> correctness;
    if (stage_is_fresh(refusal_path) && stage_is_fresh(correctness_path)) {
        refusals = load_jsonl<precise::RefusalVerdict>(refusal_path);
        correctness = load_jsonl<precise::CorrectnessVerdict>(correctness_path);
    } else {
        std::map<std::string, const precise::QAItem*> by_id;
        for (const precise::QAItem& it : items) by_id[it.item_id] = &it;
        refusals.resize(responses.size());
        std::vector<std::optional<precise::CorrectnessVerdict>> cslots(responses.size());
        parallel_for_indexed(responses.size(), config_.workers, [&](std::size_t i) {
            const precise::ResponseRecord& r = responses[i];
            if (r.errored) {
                refusals[i] = {r.item_id, false, "(errored response, not judged)"};
                return;
            }
            const precise::QAItem& item = *by_id.at(r.item_id);
            refusals[i] = precise::judge_abstention(item, r, client_, roles.abstention_judge, templates_);
            if (!refusals[i].is_abstaining)
                cslots[i] = precise::judge_correctness(item, r, client_, roles.correctness_judge, templates_);
        });
        for (auto& slot : cslots)
            if (slot) correctness.push_back(std::move(*slot));
        commit_stage(refusal_path, dump_jsonl(refusals));
        commit_stage(correctness_path, dump_jsonl(correctness));
    }

    // Errored responses carry placeholder refusal verdicts; score() skips them.
    std::vector<precise::RefusalVerdict> judged;
    for (std::size_t i = 0; i < responses.size(); ++i)
        if (!responses[i].errored) judged.push_back(refusals[i]);
    precise::PreciseMetrics m = precise::score(items, responses, judged, correctness);

    const auto report_path = dir / "report.json";
    if (!stage_is_fresh(report_path)) {
        commit_stage(report_path,
                     trial_report("precisewikiqa", trial, seed, config_, templates_, m.to_json()).dump(2) + "\n");
    }
    return m.to_metric_map();
}

metrics::MetricMap Runner::run_longwiki_trial(const corpus::PageStore& store,
                                              const retrieval::RetrievalIndex& index, int trial,
                                              const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::uint64_t seed = derive_seed(config_.master_seed, "longwiki", static_cast<std::uint64_t>(trial));
    const Roles& roles = config_.roles;

    const auto prompts_path = dir / "prompts.jsonl";
    std::vector<longwiki::LongWikiPrompt> prompts;
    if (stage_is_fresh(prompts_path)) {
        prompts = load_jsonl<longwiki::LongWikiPrompt>(prompts_path);
        log_ << "[longwiki t" << trial << "] prompts: reused " << prompts.size() << "\n";
    } else {
        longwiki::GenOptions gen;
        gen.per_level = config_.longwiki.per_level;
        gen.levels = config_.longwiki.levels;
        gen.workers = config_.workers;
        prompts = longwiki::generate_prompts(store, client_, roles.qgen, roles.answerability, templates_, gen,
                                             seed);
        commit_stage(prompts_path, dump_jsonl(prompts));
        log_ << "[longwiki t" << trial << "] prompts: " << prompts.size() << " generated\n";
    }

    const auto responses_path = dir / "responses.jsonl";
    std::vector<longwiki::ResponseRecord> responses;
    if (stage_is_fresh(responses_path)) {
        responses = load_jsonl<longwiki::ResponseRecord>(responses_path);
    } else {
        llm::GenerationParams params;
        params.max_tokens = config_.longwiki.infer_max_tokens;
        responses = longwiki::run_inference(prompts, client_, roles.tested, params, config_.workers);
        commit_stage(responses_path, dump_jsonl(responses));
    }

    const auto refusal_path = dir / "refusal_verdicts.jsonl";
    std::vector<longwiki::RefusalVerdict> refusals;
    std::map<std::string, const longwiki::LongWikiPrompt*> by_id;
    for (const auto& p : prompts) by_id[p.prompt_id] = &p;
    if (stage_is_fresh(refusal_path)) {
        refusals = load_jsonl<longwiki::RefusalVerdict>(refusal_path);
    } else {
        refusals.resize(responses.size());
        parallel_for_indexed(responses.size(), config_.workers, [&](std::size_t i) {
            const auto& r = responses[i];
            if (r.errored) {
                refusals[i] = {r.item_id, false, "(errored response, not judged)"};
                return;
            }
            refusals[i] = longwiki::judge_refusal(*by_id.at(r.item_id), r, client_, roles.abstention_judge,
                                                  templates_);
        });
        commit_stage(refusal_path, dump_jsonl(refusals));
    }
    std::map<std::string, bool> refused;
    for (const auto& v : refusals) refused[v.item_id] = v.is_abstaining;

    const auto claims_path = dir / "claims.jsonl";
    std::vector<longwiki::Claim> claims;
    if (stage_is_fresh(claims_path)) {
        claims = load_jsonl<longwiki::Claim>(claims_path);
    } else {
        longwiki::ExtractionOptions ex;
        ex.context_sentences = config_.longwiki.context_sentences;
        std::vector<std::vector<longwiki::Claim>> per_response(responses.size());
        parallel_for_indexed(responses.size(), config_.workers, [&](std::size_t i) {
            const auto& r = responses[i];
            if (r.errored || refused.at(r.item_id)) return;
            per_response[i] =
                longwiki::extract_claims(*by_id.at(r.item_id), r.text, client_, roles.extractor, templates_, ex);
        });
        for (auto& list : per_response)
            for (auto& c : list) claims.push_back(std::move(c));
        commit_stage(claims_path, dump_jsonl(claims));
        log_ << "[longwiki t" << trial << "] claims: " << claims.size() << "\n";
    }

    const auto verdicts_path = dir / "claim_verdicts.jsonl";
    std::vector<longwiki::ClaimVerdict> verdicts;
    if (stage_is_fresh(verdicts_path)) {
        verdicts = load_jsonl<longwiki::ClaimVerdict>(verdicts_path);
    } else {
        longwiki::EvidenceSelector selector(store, index, config_.longwiki.scope_cap);
        // Entities depend only on the prompt, so compute them once per prompt.
        std::map<std::string, std::vector<std::string>> entities;
        for (const auto& p : prompts) {
            if (roles.entity_extractor) {
                entities[p.prompt_id] =
                    longwiki::llm_entities(p.prompt_text, client_, *roles.entity_extractor, templates_);
            } else {
                entities[p.prompt_id] = longwiki::heuristic_entities(p.prompt_text);
            }
        }
        verdicts.resize(claims.size());
        parallel_for_indexed(claims.size(), config_.workers, [&](std::size_t i) {
            const longwiki::Claim& c = claims[i];
            longwiki::EvidenceSelection ev = selector.select(c, *by_id.at(c.prompt_id), entities.at(c.prompt_id));
            verdicts[i] = longwiki::verify_claim(c, ev, client_, roles.verifier, templates_);
        });
        commit_stage(verdicts_path, dump_jsonl(verdicts));
    }

    // Fold back to per-prompt (refused, S, T).
    std::map<std::string, longwiki::PromptOutcome> outcomes;
    for (const auto& p : prompts) {
        longwiki::PromptOutcome o;
        o.prompt_id = p.prompt_id;
        outcomes[p.prompt_id] = o;
    }
    for (const auto& r : responses) {
        if (r.errored) outcomes[r.item_id].errored = true;
        else outcomes[r.item_id].refused = refused.at(r.item_id);
    }
    std::map<std::string, const longwiki::Claim*> claim_by_id;
    for (const auto& c : claims) {
        ++outcomes[c.prompt_id].total;
        claim_by_id[c.claim_id] = &c;
    }
    for (const auto& v : verdicts) {
        if (v.errored) {
            outcomes[claim_by_id.at(v.claim_id)->prompt_id].errored = true;
        } else if (v.supported) {
            ++outcomes[claim_by_id.at(v.claim_id)->prompt_id].supported;
        }
    }
    std::vector<longwiki::PromptOutcome> ordered;
    for (const auto& p : prompts) ordered.push_back(outcomes.at(p.prompt_id));
    longwiki::LongWikiMetrics m = longwiki::score(ordered, config_.longwiki.k);

    const auto report_path = dir / "report.json";
    if (!stage_is_fresh(report_path)) {
        commit_stage(report_path,
                     trial_report("longwiki", trial, seed, config_, templates_, m.to_json()).dump(2) + "\n");
    }
    return m.to_metric_map();
}

metrics::MetricMap Runner::run_nonexistent_trial(int trial, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::uint64_t seed =
        derive_seed(config_.master_seed, "nonexistent", static_cast<std::uint64_t>(trial));
    const Roles& roles = config_.roles;
    const NonexistentConfig& nc = config_.nonexistent;

    const auto entities_path = dir / "entities.jsonl";
    std::vector<nonexistent::NonexistentEntity> entities;
    if (stage_is_fresh(entities_path)) {
        entities = load_jsonl<nonexistent::NonexistentEntity>(entities_path);
        log_ << "[nonexistent t" << trial << "] entities: reused " << entities.size() << "\n";
    } else {
        for (const std::string& domain : nc.mixed.domains) {
            auto it = nc.mixed.name_files.find(domain);
            if (it == nc.mixed.name_files.end())
                throw std::runtime_error("nonexistent.mixed: no name file for domain " + domain);
            nonexistent::NameDB db =
                nonexistent::NameDB::load(it->second, nonexistent::domain_from_name(domain));
            auto set = nonexistent::generate_mixed_set(db, nc.mixed.n_per_domain, seed);
            entities.insert(entities.end(), set.begin(), set.end());
        }
        if (nc.generated.sets > 0) {
            nonexistent::GeneratedSetConfig gc;
            gc.generator_endpoints = roles.entity_generators;
            gc.n_business = nc.generated.n_business;
            gc.n_event = nc.generated.n_event;
            gc.n_product = nc.generated.n_product;
            gc.sets = nc.generated.sets;
            gc.names_per_combo = nc.generated.names_per_combo;
            gc.places_per_group = nc.generated.places_per_group;
            gc.workers = config_.workers;
            gc.places = nonexistent::load_places(nc.generated.places_file);
            gc.business_types = read_lines(nc.generated.business_types_file);
            gc.event_types = read_lines(nc.generated.event_types_file);
            gc.product_types = read_lines(nc.generated.product_types_file);
            for (auto* list : {&gc.business_types, &gc.event_types, &gc.product_types})
                list->erase(std::remove_if(list->begin(), list->end(),
                                           [](const std::string& s) { return trim(s).empty(); }),
                            list->end());
            std::unique_ptr<nonexistent::SearchClient> search;
            if (nc.offline) search = std::make_unique<nonexistent::DenylistSearchClient>(nc.denylist);
            else search = std::make_unique<nonexistent::WebSearchClient>(nc.search_base_url, nc.search_api_key_env);
            auto result = nonexistent::build_generated_set(gc, client_, templates_, *search, seed);
            entities.insert(entities.end(), result.entities.begin(), result.entities.end());
            log_ << "[nonexistent t" << trial << "] generated entities: " << result.entities.size()
                 << " (verification skips: " << result.verification_skips << ")\n";
        }
        commit_stage(entities_path, dump_jsonl(entities));
        log_ << "[nonexistent t" << trial << "] entities: " << entities.size() << "\n";
    }

    const auto responses_path = dir / "responses.jsonl";
    std::vector<precise::ResponseRecord> responses;
    if (stage_is_fresh(responses_path)) {
        responses = load_jsonl<precise::ResponseRecord>(responses_path);
    } else {
        llm::GenerationParams params;
        params.max_tokens = 512;
        responses.resize(entities.size());
        parallel_for_indexed(entities.size(), config_.workers, [&](std::size_t i) {
            const auto& e = entities[i];
            std::size_t variant =
                nonexistent::pick_template_index(e, seed, templates_.inference_variant_count());
            precise::ResponseRecord& r = responses[i];
            r.item_id = e.entity_id;
            r.prompt_text = nonexistent::render_inference_prompt(e, variant, templates_);
            r.endpoint = roles.tested;
            r.params = params;
            try {
                r.text = client_.complete(roles.tested, {{llm::Role::user, r.prompt_text}}, params);
            } catch (const std::exception& ex) {
                r.errored = true;
                r.error = ex.what();
            }
        });
        commit_stage(responses_path, dump_jsonl(responses));
    }

    const auto verdicts_path = dir / "belief_verdicts.jsonl";
    std::vector<nonexistent::BeliefVerdict> verdicts;
    if (stage_is_fresh(verdicts_path)) {
        verdicts = load_jsonl<nonexistent::BeliefVerdict>(verdicts_path);
    } else {
        std::map<std::string, const nonexistent::NonexistentEntity*> by_id;
        for (const auto& e : entities) by_id[e.entity_id] = &e;
        verdicts.resize(responses.size());
        parallel_for_indexed(responses.size(), config_.workers, [&](std::size_t i) {
            const auto& r = responses[i];
            if (r.errored) {
                verdicts[i] = {r.item_id, false, "(errored response, not judged)", true, r.error};
                return;
            }
            verdicts[i] = nonexistent::judge_belief(*by_id.at(r.item_id), r.text, client_, roles.belief_judge,
                                                    templates_);
        });
        commit_stage(verdicts_path, dump_jsonl(verdicts));
    }

    nonexistent::FalseAcceptanceMetrics m = nonexistent::score(entities, verdicts);
    const auto report_path = dir / "report.json";
    if (!stage_is_fresh(report_path)) {
        commit_stage(report_path,
                     trial_report("nonexistentrefusal", trial, seed, config_, templates_, m.to_json()).dump(2) +
                         "\n");
    }
    return m.to_metric_map();
}

int Runner::run(const std::set<std::string>& tasks) {
    const std::filesystem::path run_dir = config_.artifacts_dir / config_.run_id;
    std::filesystem::create_directories(run_dir);

    std::optional<corpus::PageStore> store;
    std::optional<retrieval::RetrievalIndex> index;
    if (tasks.count("precise") || tasks.count("longwiki")) {
        store = prepare_corpus(config_.corpus, log_);
    }
    if (tasks.count("longwiki")) {
        index = retrieval::RetrievalIndex::build_from_store(*store);
        log_ << "[corpus] retrieval index: " << index->passages().size() << " passages\n";
    }

    bool any_failed = false;
    std::vector<metrics::TaskResults> all_results;
    const std::string model_label = client_.endpoint(config_.roles.tested).model_id;
    struct TaskPlan {
        std::string key;
        std::string label;
    };
    for (const TaskPlan& plan : {TaskPlan{"precise", "precisewikiqa"}, TaskPlan{"longwiki", "longwiki"},
                                 TaskPlan{"nonexistent", "nonexistentrefusal"}}) {
        if (!tasks.count(plan.key)) continue;
        std::vector<metrics::MetricMap> trials;
        try {
            for (int t = 0; t < config_.trials; ++t) {
                std::filesystem::path dir = run_dir / plan.label / ("trial" + std::to_string(t));
                if (plan.key == "precise") trials.push_back(run_precise_trial(*store, t, dir));
                else if (plan.key == "longwiki") trials.push_back(run_longwiki_trial(*store, *index, t, dir));
                else trials.push_back(run_nonexistent_trial(t, dir));
            }
        } catch (const std::exception& e) {
            // A failed stage halts this task; the other tasks still run.
            log_ << "[" << plan.label << "] FAILED: " << e.what() << "\n";
            any_failed = true;
            continue;
        }
        auto aggregates = metrics::aggregate(trials);
        metrics::TaskResults task_results;
        task_results.task = plan.label;
        task_results.models.push_back({model_label, aggregates});
        all_results.push_back(task_results);

        json agg = json::object();
        for (const auto& [name, a] : aggregates) {
            json values = json::array();
            for (double v : a.values) values.push_back(metrics::round4(v));
            agg[name] = json{{"values", values},
                             {"mean", a.values.empty() ? json(nullptr) : json(metrics::round4(a.mean))},
                             {"std", a.values.empty() ? json(nullptr) : json(metrics::round4(a.sample_std))},
                             {"trials", a.trial_count},
                             {"undefined_trials", a.any_undefined}};
        }
        commit_stage(run_dir / plan.label / "aggregate.json", agg.dump(2) + "\n");
    }

    if (!all_results.empty()) {
        commit_stage(run_dir / "report.json", metrics::render_report(all_results, metrics::ReportFormat::json));
        commit_stage(run_dir / "report.md", metrics::render_report(all_results, metrics::ReportFormat::markdown));
        commit_stage(run_dir / "report.csv", metrics::render_report(all_results, metrics::ReportFormat::csv));
        log_ << "[report] " << (run_dir / "report.json").string() << "\n";
    }
    return any_failed ? 1 : 0;
}

}  // namespace hallulens::pipeline
