#include "hallulens/longwiki.hpp"

#include "hallulens/tokenize.hpp"
#include "hallulens/util.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace hallulens::longwiki {

using nlohmann::json;

json LongWikiPrompt::to_json() const {
    return json{{"prompt_id", prompt_id},
                {"page_id", page_id},
                {"difficulty_level", difficulty_level},
                {"prompt_text", prompt_text},
                {"mock_answer_sentence_count", mock_answer_sentence_count},
                {"trial_seed", trial_seed}};
}

LongWikiPrompt LongWikiPrompt::from_json(const json& j) {
    LongWikiPrompt p;
    p.prompt_id = j.at("prompt_id");
    p.page_id = j.at("page_id");
    p.difficulty_level = j.at("difficulty_level");
    p.prompt_text = j.at("prompt_text");
    p.mock_answer_sentence_count = j.at("mock_answer_sentence_count");
    p.trial_seed = j.at("trial_seed");
    return p;
}

json Claim::to_json() const {
    return json{{"claim_id", claim_id},
                {"prompt_id", prompt_id},
                {"text", text},
                {"source_sentence", source_sentence}};
}

Claim Claim::from_json(const json& j) {
    return Claim{j.at("claim_id"), j.at("prompt_id"), j.at("text"), j.at("source_sentence")};
}

json ClaimVerdict::to_json() const {
    json ev = json::array();
    for (const EvidenceRef& e : evidence) ev.push_back({{"page_id", e.page_id}, {"passage_index", e.passage_index}});
    json j{{"claim_id", claim_id}, {"supported", supported}, {"evidence", ev},
           {"raw_judge_text", raw_judge_text}, {"errored", errored}};
    if (errored) j["error"] = error;
    return j;
}

ClaimVerdict ClaimVerdict::from_json(const json& j) {
    ClaimVerdict v;
    v.claim_id = j.at("claim_id");
    v.supported = j.at("supported");
    for (const auto& e : j.at("evidence")) v.evidence.push_back({e.at("page_id"), e.at("passage_index")});
    v.raw_judge_text = j.value("raw_judge_text", "");
    v.errored = j.value("errored", false);
    v.error = j.value("error", "");
    return v;
}

std::vector<LongWikiPrompt> generate_prompts(const corpus::PageStore& store, llm::LlmClient& client,
                                             const std::string& qgen_endpoint,
                                             const std::string& answer_endpoint,
                                             const llm::TemplateLibrary& templates, const GenOptions& options,
                                             std::uint64_t seed) {
    if (!store.bins_assigned()) throw std::runtime_error("generate_prompts: bins not assigned");
    const llm::PromptTemplate& qgen = templates.get(llm::tmpl::kLongWikiQGen);
    const llm::PromptTemplate& answerability = templates.get(llm::tmpl::kPreciseAnswerability);

    std::map<int, std::vector<const corpus::WikiPage*>> by_level;
    for (const corpus::WikiPage& p : store.pages())
        if (options.levels.count(p.difficulty_bin)) by_level[p.difficulty_bin].push_back(&p);

    std::vector<LongWikiPrompt> prompts;
    for (int level : options.levels) {
        auto& pages = by_level[level];
        std::sort(pages.begin(), pages.end(),
                  [](const corpus::WikiPage* a, const corpus::WikiPage* b) { return a->page_id < b->page_id; });
        SeededRng rng(derive_seed(seed, "longwiki_prompts", static_cast<std::uint64_t>(level)));
        rng.shuffle(pages);

        // Candidate attempts run one page at a time so rejected candidates
        // draw a fresh page of the same level, per the generation procedure.
        struct Attempt {
            const corpus::WikiPage* page;
            std::size_t section_index;
            std::string section_text;
        };
        std::vector<Attempt> attempts;
        for (const corpus::WikiPage* page : pages) {
            std::vector<corpus::Section> sections = corpus::split_sections(*page);
            if (sections.empty()) continue;
            std::size_t si = static_cast<std::size_t>(rng.uniform(sections.size()));
            attempts.push_back({page, si, sections[si].text});
        }

        auto attempt_prompt = [&](const Attempt& a) -> std::optional<LongWikiPrompt> {
            std::string question = trim(client.complete(
                qgen_endpoint,
                llm::render(qgen, {{"wiki_page_title", a.page->title}, {"wiki_document", a.section_text}}),
                options.qgen_params, qgen.digest));
            if (question.empty() || question.find("[NO QUESTION]") != std::string::npos) return std::nullopt;
            std::string answer = trim(client.complete(
                answer_endpoint,
                llm::render(answerability, {{"reference_document", a.section_text}, {"question", question}}),
                options.answer_params, answerability.digest));
            if (answer.empty() || to_lower(answer).rfind("unanswerable", 0) == 0) return std::nullopt;
            std::size_t sentences = split_sentences(answer).size();
            if (sentences < options.min_mock_sentences) return std::nullopt;
            LongWikiPrompt p;
            p.prompt_id = a.page->page_id + ":s" + std::to_string(a.section_index);
            p.page_id = a.page->page_id;
            p.difficulty_level = level;
            p.prompt_text = question;
            p.mock_answer_sentence_count = sentences;
            p.trial_seed = seed;
            return p;
        };

        // Fixed-size waves keep the accepted set independent of worker timing.
        std::vector<std::optional<LongWikiPrompt>> slots(attempts.size());
        const std::size_t wave = std::max<std::size_t>(options.per_level * 2, 16);
        std::size_t evaluated = 0, taken = 0;
        while (evaluated < attempts.size() && taken < options.per_level) {
            std::size_t end = std::min(attempts.size(), evaluated + wave);
            std::size_t begin = evaluated;
            parallel_for_indexed(end - begin, options.workers,
                                 [&](std::size_t i) { slots[begin + i] = attempt_prompt(attempts[begin + i]); });
            taken = 0;
            for (std::size_t i = 0; i < end; ++i)
                if (slots[i]) ++taken;
            evaluated = end;
        }
        std::size_t pushed = 0;
        for (std::size_t i = 0; i < evaluated && pushed < options.per_level; ++i) {
            if (slots[i]) {
                prompts.push_back(std::move(*slots[i]));
                ++pushed;
            }
        }
        if (pushed < options.per_level)
            throw std::runtime_error("level " + std::to_string(level) + " exhausted after " +
                                     std::to_string(pushed) + "/" + std::to_string(options.per_level) +
                                     " accepted prompts");
    }
    return prompts;
}

std::vector<ResponseRecord> run_inference(const std::vector<LongWikiPrompt>& prompts, llm::LlmClient& client,
                                          const std::string& tested_endpoint, llm::GenerationParams params,
                                          std::size_t workers) {
    if (prompts.empty()) throw std::runtime_error("run_inference: no prompts");
    std::vector<ResponseRecord> records(prompts.size());
    parallel_for_indexed(prompts.size(), workers, [&](std::size_t i) {
        ResponseRecord& r = records[i];
        r.item_id = prompts[i].prompt_id;
        r.prompt_text = prompts[i].prompt_text;
        r.endpoint = tested_endpoint;
        r.params = params;
        try {
            r.text = client.complete(tested_endpoint, {{llm::Role::user, prompts[i].prompt_text}}, params);
        } catch (const std::exception& e) {
            r.errored = true;
            r.error = e.what();
        }
    });
    return records;
}

RefusalVerdict judge_refusal(const LongWikiPrompt& prompt, const ResponseRecord& response,
                             llm::LlmClient& client, const std::string& judge_endpoint,
                             const llm::TemplateLibrary& templates, const llm::GenerationParams& params) {
    llm::JudgeReply reply =
        llm::run_json_judge(client, judge_endpoint, templates.get(llm::tmpl::kAbstention),
                            {{"prompt", prompt.prompt_text}, {"generation", response.text}},
                            {"is_abstaining"}, params);
    RefusalVerdict v;
    v.item_id = prompt.prompt_id;
    v.raw_judge_text = reply.raw;
    v.is_abstaining = reply.verdict && (*reply.verdict)["is_abstaining"].is_boolean()
                          ? (*reply.verdict)["is_abstaining"].get<bool>()
                          : false;
    return v;
}

std::vector<Claim> extract_claims(const LongWikiPrompt& prompt, const std::string& response_text,
                                  llm::LlmClient& client, const std::string& extractor_endpoint,
                                  const llm::TemplateLibrary& templates, const ExtractionOptions& options) {
    const llm::PromptTemplate& tmpl = templates.get(llm::tmpl::kClaimExtraction);
    std::vector<std::string> sentences = split_sentences(response_text);
    std::vector<Claim> claims;
    std::size_t n = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        std::size_t lo = i >= options.context_sentences ? i - options.context_sentences : 0;
        std::size_t hi = std::min(sentences.size(), i + options.context_sentences + 1);
        std::string context;
        for (std::size_t s = lo; s < hi; ++s) {
            if (s > lo) context += " ";
            context += sentences[s];
        }
        std::string reply = client.complete(
            extractor_endpoint,
            llm::render(tmpl, {{"question", prompt.prompt_text}, {"context", context}, {"sentence", sentences[i]}}),
            options.params, tmpl.digest);
        for (const std::string& line : split(reply, '\n')) {
            std::string text = trim(line);
            if (text.empty()) continue;
            if (icontains(text, "no verifiable claim")) continue;
            Claim c;
            c.claim_id = prompt.prompt_id + ":c" + std::to_string(n++);
            c.prompt_id = prompt.prompt_id;
            c.text = text;
            c.source_sentence = sentences[i];
            claims.push_back(std::move(c));
        }
    }
    return claims;
}

std::vector<std::string> heuristic_entities(const std::string& text) {
    // Capitalized-span scanner: maximal runs of tokens whose first letter is
    // uppercase. Leading interrogatives and lone stopwords are dropped.
    static const std::set<std::string> stop{"The",  "A",    "An",   "What", "Who",  "When", "Where",
                                            "Why",  "How",  "Which", "Describe", "Explain", "In",  "On",
                                            "At",   "Of",   "For",  "And",  "Or",   "I",    "It"};
    std::vector<std::string> tokens = whitespace_tokens(text);
    std::vector<std::string> entities;
    std::set<std::string> seen;
    std::vector<std::string> run;
    auto flush = [&] {
        if (run.empty()) return;
        if (run.size() == 1 && stop.count(run[0])) {
            run.clear();
            return;
        }
        std::string ent = join(run, " ");
        if (seen.insert(to_lower(ent)).second) entities.push_back(ent);
        run.clear();
    };
    for (std::string token : tokens) {
        while (!token.empty() && !std::isalnum(static_cast<unsigned char>(token.back()))) token.pop_back();
        while (!token.empty() && !std::isalnum(static_cast<unsigned char>(token.front())))
            token.erase(token.begin());
        if (!token.empty() && std::isupper(static_cast<unsigned char>(token[0]))) {
            run.push_back(token);
        } else {
            flush();
        }
    }
    flush();
    return entities;
}

std::vector<std::string> llm_entities(const std::string& text, llm::LlmClient& client,
                                      const std::string& endpoint, const llm::TemplateLibrary& templates,
                                      const llm::GenerationParams& params) {
    const llm::PromptTemplate& tmpl = templates.get(llm::tmpl::kEntityExtraction);
    std::string reply = client.complete(endpoint, llm::render(tmpl, {{"question", text}}), params, tmpl.digest);
    std::vector<std::string> entities;
    std::set<std::string> seen;
    for (const std::string& part : split(reply, ',')) {
        std::string ent = trim(part);
        if (ent.empty() || iequals(ent, "none")) continue;
        if (seen.insert(to_lower(ent)).second) entities.push_back(ent);
    }
    return entities;
}

EvidenceSelector::EvidenceSelector(const corpus::PageStore& store, const retrieval::RetrievalIndex& full_index,
                                   std::size_t scope_cap, std::size_t top_k)
    : store_(store), full_index_(full_index), scope_cap_(scope_cap), top_k_(top_k) {}

EvidenceSelection EvidenceSelector::select(const Claim& claim, const LongWikiPrompt& prompt,
                                           const std::vector<std::string>& entities) const {
    EvidenceSelection out;
    const corpus::WikiPage& seed_page = store_.at(prompt.page_id);
    std::string query = seed_page.title + " " + claim.text;

    // No extracted entities leaves nothing to scope with; go straight to the
    // whole-index search rather than searching the seed page alone.
    std::vector<const corpus::WikiPage*> scoped;
    if (!entities.empty()) {
        try {
            scoped = corpus::scope_pages(entities, store_, prompt.page_id, scope_cap_);
        } catch (const std::exception&) {
            scoped.clear();
        }
    }
    if (scoped.empty()) {
        out.fallback_whole_index = true;
        for (const auto& hit : full_index_.search(query, top_k_)) out.passages.push_back(*hit.passage);
        return out;
    }

    // Score query = seed title + claim against title-prefixed passages of the
    // scoped pages; the top five passages win.
    std::vector<corpus::Passage> original;
    std::vector<corpus::Passage> prefixed;
    for (const corpus::WikiPage* page : scoped) {
        for (corpus::Passage& p : corpus::chunk_passages(*page)) {
            corpus::Passage pref = p;
            pref.text = page->title + " " + p.text;
            prefixed.push_back(std::move(pref));
            original.push_back(std::move(p));
        }
    }
    retrieval::RetrievalIndex scoped_index = retrieval::RetrievalIndex::build(std::move(prefixed));
    std::map<std::pair<std::string, std::size_t>, const corpus::Passage*> originals;
    for (const corpus::Passage& p : original) originals[{p.page_id, p.passage_index}] = &p;
    for (const auto& hit : scoped_index.search(query, top_k_)) {
        auto it = originals.find({hit.passage->page_id, hit.passage->passage_index});
        if (it != originals.end()) out.passages.push_back(*it->second);
    }
    return out;
}

ClaimVerdict verify_claim(const Claim& claim, const EvidenceSelection& evidence, llm::LlmClient& client,
                          const std::string& verifier_endpoint, const llm::TemplateLibrary& templates,
                          const llm::GenerationParams& params) {
    if (evidence.passages.size() > 5) throw std::runtime_error("verify_claim: more than 5 passages");
    ClaimVerdict v;
    v.claim_id = claim.claim_id;
    for (const corpus::Passage& p : evidence.passages) v.evidence.push_back({p.page_id, p.passage_index});
    std::string passages_text;
    for (std::size_t i = 0; i < evidence.passages.size(); ++i) {
        const corpus::Passage& p = evidence.passages[i];
        passages_text += "[" + std::to_string(i + 1) + "] " + p.page_title + ": " + p.text + "\n";
    }
    if (passages_text.empty()) passages_text = "(no passages retrieved)\n";
    try {
        llm::JudgeReply reply = llm::run_json_judge(
            client, verifier_endpoint, templates.get(llm::tmpl::kClaimVerification),
            {{"claim", claim.text}, {"passages", passages_text}}, {"supported"}, params);
        v.raw_judge_text = reply.raw;
        // unverifiable counts as hallucination: parse failure => unsupported
        v.supported = reply.verdict && (*reply.verdict)["supported"].is_boolean()
                          ? (*reply.verdict)["supported"].get<bool>()
                          : false;
    } catch (const std::exception& e) {
        v.errored = true;
        v.error = e.what();
    }
    return v;
}

metrics::MetricMap LongWikiMetrics::to_metric_map() const {
    return metrics::MetricMap{{"false_refusal_rate", false_refusal_rate},
                              {"precision", precision},
                              {"recall_at_k", recall_at_k},
                              {"f1_at_k", f1_at_k}};
}

json LongWikiMetrics::to_json() const {
    json per = json::array();
    for (const PromptScore& p : per_prompt) {
        per.push_back(json{{"prompt_id", p.prompt_id},
                           {"supported", p.supported},
                           {"total", p.total},
                           {"precision", metrics::round4(p.precision)},
                           {"recall_at_k", metrics::round4(p.recall_at_k)},
                           {"f1_at_k", metrics::round4(p.f1_at_k)}});
    }
    return json{{"global", json{{"false_refusal_rate", metrics::json_metric(false_refusal_rate)},
                                {"precision", metrics::json_metric(precision)},
                                {"recall_at_k", metrics::json_metric(recall_at_k)},
                                {"f1_at_k", metrics::json_metric(f1_at_k)}}},
                {"k", k},
                {"counts", json{{"n_prompts", n_prompts}, {"n_refused", n_refused}, {"n_errored", n_errored}}},
                {"per_prompt", per}};
}

LongWikiMetrics score(const std::vector<PromptOutcome>& outcomes, int k) {
    if (k <= 0) throw std::invalid_argument("score: k must be positive");
    LongWikiMetrics out;
    out.k = k;
    double sum_p = 0, sum_r = 0, sum_f1 = 0;
    for (const PromptOutcome& o : outcomes) {
        if (o.supported > o.total)
            throw std::runtime_error("prompt " + o.prompt_id + ": supported exceeds total claims");
        if (o.errored) {
            ++out.n_errored;
            continue;
        }
        ++out.n_prompts;
        if (o.refused) {
            ++out.n_refused;
            continue;
        }
        PromptScore s;
        s.prompt_id = o.prompt_id;
        s.supported = o.supported;
        s.total = o.total;
        s.precision = o.total == 0 ? 0.0 : static_cast<double>(o.supported) / static_cast<double>(o.total);
        s.recall_at_k = static_cast<double>(std::min<std::size_t>(o.supported, static_cast<std::size_t>(k))) /
                        static_cast<double>(k);
        s.f1_at_k = o.supported == 0 ? 0.0 : 2.0 * s.precision * s.recall_at_k / (s.precision + s.recall_at_k);
        sum_p += s.precision;
        sum_r += s.recall_at_k;
        sum_f1 += s.f1_at_k;
        out.per_prompt.push_back(std::move(s));
    }
    std::size_t attempted = out.per_prompt.size();
    if (out.n_prompts == 0) {
        out.false_refusal_rate = {0.0, false};
    } else {
        out.false_refusal_rate = {static_cast<double>(out.n_refused) / static_cast<double>(out.n_prompts), true};
    }
    if (attempted == 0) {
        out.precision = {0.0, false};
        out.recall_at_k = {0.0, false};
        out.f1_at_k = {0.0, false};
    } else {
        double n = static_cast<double>(attempted);
        out.precision = {sum_p / n, true};
        out.recall_at_k = {sum_r / n, true};
        out.f1_at_k = {sum_f1 / n, true};
    }
    return out;
}

}  // namespace hallulens::longwiki
