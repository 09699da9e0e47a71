#include "hallulens/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace hallulens;

namespace {

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

pipeline::RunConfig load_and_validate(const CommonArgs& args) {
    pipeline::RunConfig config = pipeline::RunConfig::load(args.config_path);
    if (args.seed_set) config.master_seed = args.seed;
    std::vector<std::string> errors = config.validate();
    if (!errors.empty()) {
        std::cerr << "config errors:\n";
        for (const std::string& e : errors) std::cerr << "  - " << e << "\n";
        std::exit(2);
    }
    return config;
}

struct StageContext {
    pipeline::RunConfig config;
    llm::LlmClient client;
    llm::TemplateLibrary templates;

    explicit StageContext(pipeline::RunConfig cfg)
        : config(std::move(cfg)),
          client(llm::LlmClient::Options{.cache_dir = config.cache_dir}),
          templates(llm::TemplateLibrary::load(config.prompts_dir)) {
        for (const llm::Endpoint& ep : config.endpoints) client.register_endpoint(ep);
    }
};

corpus::PageStore load_store_arg(const std::string& path) {
    corpus::PageStore store = corpus::PageStore::load(path);
    if (!store.bins_assigned())
        throw std::runtime_error("page store has no difficulty bins; run `hallulens corpus bins` first");
    return store;
}

template <typename T>
void write_stage(const std::string& path, const std::vector<T>& records) {
    pipeline::commit_stage(path, pipeline::dump_jsonl(records));
    std::cout << path << ": " << records.size() << " records\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic extrinsic-hallucination evaluation harness"};
    app.require_subcommand(1);
    CommonArgs common;

    // ---- run ---------------------------------------------------------------
    auto* run_cmd = app.add_subcommand("run", "run tasks end to end from a config file");
    std::string tasks_csv = "precise,longwiki,nonexistent";
    int trials_override = -1;
    run_cmd->add_option("--config", common.config_path, "run config (JSON)")->required();
    run_cmd->add_option("--tasks", tasks_csv, "comma-separated subset of precise,longwiki,nonexistent");
    run_cmd->add_option("--trials", trials_override, "override configured trial count");
    auto* seed_opt = run_cmd->add_option("--seed", common.seed, "override master seed");
    run_cmd->callback([&] {
        common.seed_set = seed_opt->count() > 0;
        pipeline::RunConfig config = load_and_validate(common);
        if (trials_override > 0) config.trials = trials_override;
        std::set<std::string> tasks;
        for (const std::string& t : split(tasks_csv, ',')) {
            std::string key = trim(t);
            if (key.empty()) continue;
            if (key != "precise" && key != "longwiki" && key != "nonexistent") {
                std::cerr << "unknown task: " << key << "\n";
                std::exit(2);
            }
            tasks.insert(key);
        }
        pipeline::Runner runner(config, std::cout);
        std::exit(runner.run(tasks));
    });

    // ---- corpus ------------------------------------------------------------
    auto* corpus_cmd = app.add_subcommand("corpus", "corpus ingestion, binning, and indexing");
    corpus_cmd->require_subcommand(1);
    static std::string archive, centrality, corpus_out, corpus_store;
    static int n_bins = 10;
    {
        auto* ingest = corpus_cmd->add_subcommand("ingest", "ingest archive + centrality into a page store");
        ingest->add_option("--archive", archive, "newline-delimited page records")->required();
        ingest->add_option("--centrality", centrality, "two-column page,score table")->required();
        ingest->add_option("--out", corpus_out, "page store output path")->required();
        ingest->callback([&] {
            corpus::PageStore store = corpus::ingest_corpus(archive, centrality);
            store.save(corpus_out);
            std::size_t flagged = 0;
            for (const auto& p : store.pages())
                if (p.centrality_missing) ++flagged;
            std::cout << corpus_out << ": " << store.size() << " pages (" << flagged
                      << " missing centrality, scored 0)\n";
        });

        auto* bins = corpus_cmd->add_subcommand("bins", "assign equal-frequency difficulty bins");
        bins->add_option("--store", corpus_store, "page store path")->required();
        bins->add_option("--out", corpus_out, "output path (defaults to --store)");
        bins->add_option("--n-bins", n_bins, "bin count");
        bins->callback([&] {
            corpus::PageStore store = corpus::PageStore::load(corpus_store);
            corpus::assign_bins(store, n_bins);
            store.save(corpus_out.empty() ? corpus_store : corpus_out);
            std::cout << "assigned " << n_bins << " bins over " << store.size() << " pages\n";
        });

        auto* index = corpus_cmd->add_subcommand("index", "build the passage retrieval index");
        index->add_option("--store", corpus_store, "page store path")->required();
        index->add_option("--out", corpus_out, "index output path")->required();
        index->callback([&] {
            corpus::PageStore store = corpus::PageStore::load(corpus_store);
            retrieval::RetrievalIndex idx = retrieval::RetrievalIndex::build_from_store(store);
            idx.save(corpus_out);
            std::cout << corpus_out << ": " << idx.passages().size() << " passages, vocabulary "
                      << idx.vocabulary_size() << "\n";
        });
    }

    // ---- precisewikiqa ------------------------------------------------------
    auto* precise_cmd = app.add_subcommand("precisewikiqa", "short-form QA task stages");
    precise_cmd->require_subcommand(1);
    static std::string p_store, p_items, p_responses, p_refusals, p_correctness, p_out;
    static std::uint64_t p_seed = 0;
    static std::size_t p_per_bin = 0;
    static int p_trials = 1;
    {
        auto* gen = precise_cmd->add_subcommand("gen", "generate the QA test set");
        gen->add_option("--config", common.config_path)->required();
        gen->add_option("--store", p_store, "page store path")->required();
        gen->add_option("--seed", p_seed, "trial seed");
        gen->add_option("--per-bin", p_per_bin, "pages per difficulty bin");
        gen->add_option("--trials", p_trials, "accepted for parity; gen emits one trial per seed");
        gen->add_option("--out", p_items, "items JSONL")->required();
        gen->callback([&] {
            StageContext ctx(load_and_validate(common));
            corpus::PageStore store = load_store_arg(p_store);
            precise::GenOptions gen_opts;
            gen_opts.per_bin = p_per_bin ? p_per_bin : ctx.config.precise.per_bin;
            gen_opts.max_retries = ctx.config.precise.max_retries;
            gen_opts.workers = ctx.config.workers;
            auto result = precise::generate_test_set(store, ctx.client, ctx.config.roles.qgen,
                                                     ctx.config.roles.answerability, ctx.templates, gen_opts,
                                                     p_seed);
            write_stage(p_items, result.items);
            if (!result.rejections.empty()) std::cout << result.rejections.size() << " sources rejected\n";
        });

        auto* infer = precise_cmd->add_subcommand("infer", "run the tested model over the items");
        infer->add_option("--config", common.config_path)->required();
        infer->add_option("--items", p_items)->required();
        infer->add_option("--out", p_responses)->required();
        infer->callback([&] {
            StageContext ctx(load_and_validate(common));
            auto items = pipeline::load_jsonl<precise::QAItem>(p_items);
            llm::GenerationParams params;
            params.max_tokens = ctx.config.precise.infer_max_tokens;
            write_stage(p_responses, precise::run_inference(items, ctx.client, ctx.config.roles.tested, params,
                                                            ctx.config.workers));
        });

        auto* judge = precise_cmd->add_subcommand("judge", "judge refusal and correctness");
        judge->add_option("--config", common.config_path)->required();
        judge->add_option("--items", p_items)->required();
        judge->add_option("--responses", p_responses)->required();
        judge->add_option("--refusals-out", p_refusals)->required();
        judge->add_option("--correctness-out", p_correctness)->required();
        judge->callback([&] {
            StageContext ctx(load_and_validate(common));
            auto items = pipeline::load_jsonl<precise::QAItem>(p_items);
            auto responses = pipeline::load_jsonl<precise::ResponseRecord>(p_responses);
            std::map<std::string, const precise::QAItem*> by_id;
            for (const auto& it : items) by_id[it.item_id] = &it;
            std::vector<std::optional<precise::RefusalVerdict>> rslots(responses.size());
            std::vector<std::optional<precise::CorrectnessVerdict>> cslots(responses.size());
            parallel_for_indexed(responses.size(), ctx.config.workers, [&](std::size_t i) {
                const auto& r = responses[i];
                if (r.errored) return;
                const precise::QAItem& item = *by_id.at(r.item_id);
                rslots[i] = precise::judge_abstention(item, r, ctx.client, ctx.config.roles.abstention_judge,
                                                      ctx.templates);
                if (!rslots[i]->is_abstaining)
                    cslots[i] = precise::judge_correctness(item, r, ctx.client,
                                                           ctx.config.roles.correctness_judge, ctx.templates);
            });
            std::vector<precise::RefusalVerdict> refusals;
            std::vector<precise::CorrectnessVerdict> correctness;
            for (auto& r : rslots)
                if (r) refusals.push_back(std::move(*r));
            for (auto& c : cslots)
                if (c) correctness.push_back(std::move(*c));
            write_stage(p_refusals, refusals);
            write_stage(p_correctness, correctness);
        });

        auto* score = precise_cmd->add_subcommand("score", "compute PreciseWikiQA metrics");
        score->add_option("--items", p_items)->required();
        score->add_option("--responses", p_responses)->required();
        score->add_option("--refusals", p_refusals)->required();
        score->add_option("--correctness", p_correctness)->required();
        score->add_option("--out", p_out)->required();
        score->callback([&] {
            auto items = pipeline::load_jsonl<precise::QAItem>(p_items);
            auto responses = pipeline::load_jsonl<precise::ResponseRecord>(p_responses);
            auto refusals = pipeline::load_jsonl<precise::RefusalVerdict>(p_refusals);
            auto correctness = pipeline::load_jsonl<precise::CorrectnessVerdict>(p_correctness);
            auto m = precise::score(items, responses, refusals, correctness);
            pipeline::commit_stage(p_out, m.to_json().dump(2) + "\n");
            std::cout << p_out << "\n";
        });
    }

    // ---- longwiki ------------------------------------------------------------
    auto* longwiki_cmd = app.add_subcommand("longwiki", "long-form task stages");
    longwiki_cmd->require_subcommand(1);
    static std::string l_store, l_prompts, l_responses, l_refusals, l_claims, l_verdicts, l_out, l_levels;
    static std::uint64_t l_seed = 0;
    static int l_k = 0;
    {
        auto* gen = longwiki_cmd->add_subcommand("gen", "generate essay prompts");
        gen->add_option("--config", common.config_path)->required();
        gen->add_option("--store", l_store)->required();
        gen->add_option("--seed", l_seed);
        gen->add_option("--levels", l_levels, "comma-separated difficulty levels (default 5-9)");
        gen->add_option("--out", l_prompts)->required();
        gen->callback([&] {
            StageContext ctx(load_and_validate(common));
            corpus::PageStore store = load_store_arg(l_store);
            longwiki::GenOptions gen_opts;
            gen_opts.per_level = ctx.config.longwiki.per_level;
            gen_opts.levels = ctx.config.longwiki.levels;
            gen_opts.workers = ctx.config.workers;
            if (!l_levels.empty()) {
                gen_opts.levels.clear();
                for (const std::string& l : split(l_levels, ',')) gen_opts.levels.insert(std::stoi(trim(l)));
            }
            write_stage(l_prompts,
                        longwiki::generate_prompts(store, ctx.client, ctx.config.roles.qgen,
                                                   ctx.config.roles.answerability, ctx.templates, gen_opts,
                                                   l_seed));
        });

        auto* infer = longwiki_cmd->add_subcommand("infer", "run the tested model over the prompts");
        infer->add_option("--config", common.config_path)->required();
        infer->add_option("--prompts", l_prompts)->required();
        infer->add_option("--out", l_responses)->required();
        infer->callback([&] {
            StageContext ctx(load_and_validate(common));
            auto prompts = pipeline::load_jsonl<longwiki::LongWikiPrompt>(l_prompts);
            llm::GenerationParams params;
            params.max_tokens = ctx.config.longwiki.infer_max_tokens;
            write_stage(l_responses, longwiki::run_inference(prompts, ctx.client, ctx.config.roles.tested,
                                                             params, ctx.config.workers));
        });

        auto* judge = longwiki_cmd->add_subcommand("judge", "judge refusal");
        judge->add_option("--config", common.config_path)->required();
        judge->add_option("--prompts", l_prompts)->required();
        judge->add_option("--responses", l_responses)->required();
        judge->add_option("--out", l_refusals)->required();
        judge->callback([&] {
            StageContext ctx(load_and_validate(common));
            auto prompts = pipeline::load_jsonl<longwiki::LongWikiPrompt>(l_prompts);
            auto responses = pipeline::load_jsonl<longwiki::ResponseRecord>(l_responses);
            std::map<std::string, const longwiki::LongWikiPrompt*> by_id;
            for (const auto& p : prompts) by_id[p.prompt_id] = &p;
            std::vector<std::optional<longwiki::RefusalVerdict>> slots(responses.size());
            parallel_for_indexed(responses.size(), ctx.config.workers, [&](std::size_t i) {
                if (responses[i].errored) return;
                slots[i] = longwiki::judge_refusal(*by_id.at(responses[i].item_id), responses[i], ctx.client,
                                                   ctx.config.roles.abstention_judge, ctx.templates);
            });
            std::vector<longwiki::RefusalVerdict> out;
            for (auto& s : slots)
                if (s) out.push_back(std::move(*s));
            write_stage(l_refusals, out);
        });

        auto* extract = longwiki_cmd->add_subcommand("extract", "decompose responses into claims");
        extract->add_option("--config", common.config_path)->required();
        extract->add_option("--prompts", l_prompts)->required();
        extract->add_option("--responses", l_responses)->required();
        extract->add_option("--refusals", l_refusals)->required();
        extract->add_option("--out", l_claims)->required();
        extract->callback([&] {
            StageContext ctx(load_and_validate(common));
            auto prompts = pipeline::load_jsonl<longwiki::LongWikiPrompt>(l_prompts);
            auto responses = pipeline::load_jsonl<longwiki::ResponseRecord>(l_responses);
            auto refusals = pipeline::load_jsonl<longwiki::RefusalVerdict>(l_refusals);
            std::map<std::string, const longwiki::LongWikiPrompt*> by_id;
            for (const auto& p : prompts) by_id[p.prompt_id] = &p;
            std::map<std::string, bool> refused;
            for (const auto& v : refusals) refused[v.item_id] = v.is_abstaining;
            longwiki::ExtractionOptions ex;
            ex.context_sentences = ctx.config.longwiki.context_sentences;
            std::vector<std::vector<longwiki::Claim>> per(responses.size());
            parallel_for_indexed(responses.size(), ctx.config.workers, [&](std::size_t i) {
                const auto& r = responses[i];
                if (r.errored || refused[r.item_id]) return;
                per[i] = longwiki::extract_claims(*by_id.at(r.item_id), r.text, ctx.client,
                                                  ctx.config.roles.extractor, ctx.templates, ex);
            });
            std::vector<longwiki::Claim> claims;
            for (auto& list : per)
                for (auto& c : list) claims.push_back(std::move(c));
            write_stage(l_claims, claims);
        });

        auto* verify = longwiki_cmd->add_subcommand("verify", "verify claims against retrieved evidence");
        verify->add_option("--config", common.config_path)->required();
        verify->add_option("--store", l_store)->required();
        verify->add_option("--prompts", l_prompts)->required();
        verify->add_option("--claims", l_claims)->required();
        verify->add_option("--out", l_verdicts)->required();
        verify->callback([&] {
            StageContext ctx(load_and_validate(common));
            corpus::PageStore store = load_store_arg(l_store);
            retrieval::RetrievalIndex index = retrieval::RetrievalIndex::build_from_store(store);
            auto prompts = pipeline::load_jsonl<longwiki::LongWikiPrompt>(l_prompts);
            auto claims = pipeline::load_jsonl<longwiki::Claim>(l_claims);
            std::map<std::string, const longwiki::LongWikiPrompt*> by_id;
            for (const auto& p : prompts) by_id[p.prompt_id] = &p;
            std::map<std::string, std::vector<std::string>> entities;
            for (const auto& p : prompts) {
                entities[p.prompt_id] =
                    ctx.config.roles.entity_extractor
                        ? longwiki::llm_entities(p.prompt_text, ctx.client,
                                                 *ctx.config.roles.entity_extractor, ctx.templates)
                        : longwiki::heuristic_entities(p.prompt_text);
            }
            longwiki::EvidenceSelector selector(store, index, ctx.config.longwiki.scope_cap);
            std::vector<longwiki::ClaimVerdict> verdicts(claims.size());
            parallel_for_indexed(claims.size(), ctx.config.workers, [&](std::size_t i) {
                auto ev = selector.select(claims[i], *by_id.at(claims[i].prompt_id),
                                          entities.at(claims[i].prompt_id));
                verdicts[i] = longwiki::verify_claim(claims[i], ev, ctx.client, ctx.config.roles.verifier,
                                                     ctx.templates);
            });
            write_stage(l_verdicts, verdicts);
        });

        auto* score = longwiki_cmd->add_subcommand("score", "compute LongWiki metrics");
        score->add_option("--prompts", l_prompts)->required();
        score->add_option("--responses", l_responses)->required();
        score->add_option("--refusals", l_refusals)->required();
        score->add_option("--claims", l_claims)->required();
        score->add_option("--verdicts", l_verdicts)->required();
        score->add_option("--k", l_k, "recall cut-off K (default 32)");
        score->add_option("--out", l_out)->required();
        score->callback([&] {
            auto prompts = pipeline::load_jsonl<longwiki::LongWikiPrompt>(l_prompts);
            auto responses = pipeline::load_jsonl<longwiki::ResponseRecord>(l_responses);
            auto refusals = pipeline::load_jsonl<longwiki::RefusalVerdict>(l_refusals);
            auto claims = pipeline::load_jsonl<longwiki::Claim>(l_claims);
            auto verdicts = pipeline::load_jsonl<longwiki::ClaimVerdict>(l_verdicts);
            std::map<std::string, longwiki::PromptOutcome> outcomes;
            for (const auto& p : prompts) outcomes[p.prompt_id].prompt_id = p.prompt_id;
            std::map<std::string, bool> refused;
            for (const auto& v : refusals) refused[v.item_id] = v.is_abstaining;
            for (const auto& r : responses) {
                if (r.errored) outcomes[r.item_id].errored = true;
                else outcomes[r.item_id].refused = refused[r.item_id];
            }
            std::map<std::string, std::string> claim_prompt;
            for (const auto& c : claims) {
                claim_prompt[c.claim_id] = c.prompt_id;
                ++outcomes[c.prompt_id].total;
            }
            for (const auto& v : verdicts) {
                if (v.errored) outcomes[claim_prompt.at(v.claim_id)].errored = true;
                else if (v.supported) ++outcomes[claim_prompt.at(v.claim_id)].supported;
            }
            std::vector<longwiki::PromptOutcome> ordered;
            for (const auto& p : prompts) ordered.push_back(outcomes[p.prompt_id]);
            auto m = longwiki::score(ordered, l_k > 0 ? l_k : 32);
            pipeline::commit_stage(l_out, m.to_json().dump(2) + "\n");
            std::cout << l_out << "\n";
        });
    }

    // ---- nonexistent ----------------------------------------------------------
    auto* nonexistent_cmd = app.add_subcommand("nonexistent", "fabricated-entity task stages");
    nonexistent_cmd->require_subcommand(1);
    static std::string n_entities_path, n_responses, n_verdicts, n_out, n_domain, n_name_file;
    static std::uint64_t n_seed = 0;
    static std::size_t n_count = 0;
    static int n_sets = -1;
    static bool n_offline = false;
    {
        auto* gen_mixed = nonexistent_cmd->add_subcommand("gen-mixed", "mix verified-absent names from a DB");
        gen_mixed->add_option("--config", common.config_path)->required();
        gen_mixed->add_option("--domain", n_domain, "animal|plant|bacteria|medicine")->required();
        gen_mixed->add_option("--name-file", n_name_file, "override the configured name DB file");
        gen_mixed->add_option("--n", n_count, "entities to generate (default from config)");
        gen_mixed->add_option("--seed", n_seed);
        gen_mixed->add_option("--out", n_entities_path)->required();
        gen_mixed->callback([&] {
            StageContext ctx(load_and_validate(common));
            std::filesystem::path path = n_name_file;
            if (path.empty()) {
                auto it = ctx.config.nonexistent.mixed.name_files.find(n_domain);
                if (it == ctx.config.nonexistent.mixed.name_files.end())
                    throw std::runtime_error("no name file configured for domain " + n_domain);
                path = it->second;
            }
            auto db = nonexistent::NameDB::load(path, nonexistent::domain_from_name(n_domain));
            std::size_t n = n_count ? n_count : ctx.config.nonexistent.mixed.n_per_domain;
            write_stage(n_entities_path, nonexistent::generate_mixed_set(db, n, n_seed));
        });

        auto* gen_generated =
            nonexistent_cmd->add_subcommand("gen-generated", "round-robin brainstormed entities");
        gen_generated->add_option("--config", common.config_path)->required();
        gen_generated->add_option("--sets", n_sets, "number of sets (default from config)");
        gen_generated->add_flag("--offline", n_offline, "force the denylist verifier");
        gen_generated->add_option("--seed", n_seed);
        gen_generated->add_option("--out", n_entities_path)->required();
        gen_generated->callback([&] {
            StageContext ctx(load_and_validate(common));
            const auto& nc = ctx.config.nonexistent;
            nonexistent::GeneratedSetConfig gc;
            gc.generator_endpoints = ctx.config.roles.entity_generators;
            gc.n_business = nc.generated.n_business;
            gc.n_event = nc.generated.n_event;
            gc.n_product = nc.generated.n_product;
            gc.sets = n_sets >= 0 ? static_cast<std::size_t>(n_sets) : nc.generated.sets;
            gc.names_per_combo = nc.generated.names_per_combo;
            gc.places_per_group = nc.generated.places_per_group;
            gc.workers = ctx.config.workers;
            gc.places = nonexistent::load_places(nc.generated.places_file);
            gc.business_types = read_lines(nc.generated.business_types_file);
            gc.event_types = read_lines(nc.generated.event_types_file);
            gc.product_types = read_lines(nc.generated.product_types_file);
            std::unique_ptr<nonexistent::SearchClient> search;
            if (n_offline || nc.offline)
                search = std::make_unique<nonexistent::DenylistSearchClient>(nc.denylist);
            else
                search =
                    std::make_unique<nonexistent::WebSearchClient>(nc.search_base_url, nc.search_api_key_env);
            auto result = nonexistent::build_generated_set(gc, ctx.client, ctx.templates, *search, n_seed);
            write_stage(n_entities_path, result.entities);
        });

        auto* infer = nonexistent_cmd->add_subcommand("infer", "prompt the tested model about each entity");
        infer->add_option("--config", common.config_path)->required();
        infer->add_option("--entities", n_entities_path)->required();
        infer->add_option("--seed", n_seed);
        infer->add_option("--out", n_responses)->required();
        infer->callback([&] {
            StageContext ctx(load_and_validate(common));
            auto entities = pipeline::load_jsonl<nonexistent::NonexistentEntity>(n_entities_path);
            llm::GenerationParams params;
            params.max_tokens = 512;
            std::vector<precise::ResponseRecord> responses(entities.size());
            parallel_for_indexed(entities.size(), ctx.config.workers, [&](std::size_t i) {
                const auto& e = entities[i];
                auto& r = responses[i];
                r.item_id = e.entity_id;
                r.prompt_text = nonexistent::render_inference_prompt(
                    e, nonexistent::pick_template_index(e, n_seed, ctx.templates.inference_variant_count()),
                    ctx.templates);
                r.endpoint = ctx.config.roles.tested;
                r.params = params;
                try {
                    r.text = ctx.client.complete(ctx.config.roles.tested, {{llm::Role::user, r.prompt_text}},
                                                 params);
                } catch (const std::exception& ex) {
                    r.errored = true;
                    r.error = ex.what();
                }
            });
            write_stage(n_responses, responses);
        });

        auto* judge = nonexistent_cmd->add_subcommand("judge", "judge whether the model believes the entity");
        judge->add_option("--config", common.config_path)->required();
        judge->add_option("--entities", n_entities_path)->required();
        judge->add_option("--responses", n_responses)->required();
        judge->add_option("--out", n_verdicts)->required();
        judge->callback([&] {
            StageContext ctx(load_and_validate(common));
            auto entities = pipeline::load_jsonl<nonexistent::NonexistentEntity>(n_entities_path);
            auto responses = pipeline::load_jsonl<precise::ResponseRecord>(n_responses);
            std::map<std::string, const nonexistent::NonexistentEntity*> by_id;
            for (const auto& e : entities) by_id[e.entity_id] = &e;
            std::vector<nonexistent::BeliefVerdict> verdicts(responses.size());
            parallel_for_indexed(responses.size(), ctx.config.workers, [&](std::size_t i) {
                const auto& r = responses[i];
                if (r.errored) {
                    verdicts[i] = {r.item_id, false, "(errored response, not judged)", true, r.error};
                    return;
                }
                verdicts[i] = nonexistent::judge_belief(*by_id.at(r.item_id), r.text, ctx.client,
                                                        ctx.config.roles.belief_judge, ctx.templates);
            });
            write_stage(n_verdicts, verdicts);
        });

        auto* score = nonexistent_cmd->add_subcommand("score", "compute false acceptance metrics");
        score->add_option("--entities", n_entities_path)->required();
        score->add_option("--verdicts", n_verdicts)->required();
        score->add_option("--out", n_out)->required();
        score->callback([&] {
            auto entities = pipeline::load_jsonl<nonexistent::NonexistentEntity>(n_entities_path);
            auto verdicts = pipeline::load_jsonl<nonexistent::BeliefVerdict>(n_verdicts);
            auto m = nonexistent::score(entities, verdicts);
            pipeline::commit_stage(n_out, m.to_json().dump(2) + "\n");
            std::cout << n_out << "\n";
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
