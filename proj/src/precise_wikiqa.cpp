#include "hallulens/precise_wikiqa.hpp"

#include "hallulens/tokenize.hpp"
#include "hallulens/util.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace hallulens::precise {

using nlohmann::json;

json QAItem::to_json() const {
    return json{{"item_id", item_id},       {"page_id", page_id},
                {"difficulty_bin", difficulty_bin}, {"section_heading", section_heading},
                {"question", question},     {"gold_answer", gold_answer},
                {"trial_seed", trial_seed}};
}

QAItem QAItem::from_json(const json& j) {
    QAItem it;
    it.item_id = j.at("item_id");
    it.page_id = j.at("page_id");
    it.difficulty_bin = j.at("difficulty_bin");
    it.section_heading = j.at("section_heading");
    it.question = j.at("question");
    it.gold_answer = j.at("gold_answer");
    it.trial_seed = j.at("trial_seed");
    return it;
}

json ResponseRecord::to_json() const {
    json j{{"item_id", item_id},
           {"prompt_text", prompt_text},
           {"endpoint", endpoint},
           {"temperature", params.temperature},
           {"top_p", params.top_p},
           {"max_tokens", params.max_tokens},
           {"text", text},
           {"errored", errored}};
    if (errored) j["error"] = error;
    return j;
}

ResponseRecord ResponseRecord::from_json(const json& j) {
    ResponseRecord r;
    r.item_id = j.at("item_id");
    r.prompt_text = j.at("prompt_text");
    r.endpoint = j.at("endpoint");
    r.params.temperature = j.at("temperature");
    r.params.top_p = j.at("top_p");
    r.params.max_tokens = j.at("max_tokens");
    r.text = j.value("text", "");
    r.errored = j.value("errored", false);
    r.error = j.value("error", "");
    return r;
}

json RefusalVerdict::to_json() const {
    return json{{"item_id", item_id}, {"is_abstaining", is_abstaining}, {"raw_judge_text", raw_judge_text}};
}

RefusalVerdict RefusalVerdict::from_json(const json& j) {
    return RefusalVerdict{j.at("item_id"), j.at("is_abstaining"), j.value("raw_judge_text", "")};
}

std::string label_name(CorrectnessLabel label) {
    switch (label) {
        case CorrectnessLabel::CORRECT: return "CORRECT";
        case CorrectnessLabel::INCORRECT: return "INCORRECT";
        case CorrectnessLabel::UNVERIFIABLE: return "UNVERIFIABLE";
    }
    return "UNVERIFIABLE";
}

CorrectnessLabel label_from_name(const std::string& name) {
    if (name == "CORRECT") return CorrectnessLabel::CORRECT;
    if (name == "INCORRECT") return CorrectnessLabel::INCORRECT;
    if (name == "UNVERIFIABLE") return CorrectnessLabel::UNVERIFIABLE;
    throw std::runtime_error("unknown correctness label: " + name);
}

json CorrectnessVerdict::to_json() const {
    return json{{"item_id", item_id}, {"label", label_name(label)}, {"raw_judge_text", raw_judge_text}};
}

CorrectnessVerdict CorrectnessVerdict::from_json(const json& j) {
    return CorrectnessVerdict{j.at("item_id"), label_from_name(j.at("label")), j.value("raw_judge_text", "")};
}

std::vector<SourceSelection> select_sources(const corpus::PageStore& store, std::size_t per_bin,
                                            std::uint64_t seed) {
    if (!store.bins_assigned()) throw std::runtime_error("select_sources: bins not assigned");
    std::map<int, std::vector<const corpus::WikiPage*>> by_bin;
    for (const corpus::WikiPage& p : store.pages()) by_bin[p.difficulty_bin].push_back(&p);

    std::vector<SourceSelection> out;
    for (auto& [bin, pages] : by_bin) {
        if (pages.size() < per_bin)
            throw std::runtime_error("bin " + std::to_string(bin) + " has " + std::to_string(pages.size()) +
                                     " pages, needs " + std::to_string(per_bin));
        // page order within a bin follows page_id so shuffles are reproducible
        std::sort(pages.begin(), pages.end(),
                  [](const corpus::WikiPage* a, const corpus::WikiPage* b) { return a->page_id < b->page_id; });
        SeededRng rng(derive_seed(seed, "select_sources", static_cast<std::uint64_t>(bin)));
        std::vector<const corpus::WikiPage*> pool = pages;
        rng.shuffle(pool);
        std::size_t taken = 0;
        for (std::size_t i = 0; i < pool.size() && taken < per_bin; ++i) {
            const corpus::WikiPage* page = pool[i];
            std::vector<corpus::Section> sections = corpus::split_sections(*page);
            if (sections.empty()) continue;  // pathological empty page
            SourceSelection sel;
            sel.page = page;
            sel.section_index = static_cast<std::size_t>(rng.uniform(sections.size()));
            sel.section = sections[sel.section_index];
            out.push_back(std::move(sel));
            ++taken;
        }
        if (taken < per_bin)
            throw std::runtime_error("bin " + std::to_string(bin) + " ran out of non-empty pages");
    }
    return out;
}

std::optional<QAItem> generate_qa(const SourceSelection& source, llm::LlmClient& client,
                                  const std::string& qgen_endpoint, const std::string& answer_endpoint,
                                  const llm::TemplateLibrary& templates, const GenOptions& options,
                                  std::uint64_t trial_seed, std::string* reject_reason) {
    const llm::PromptTemplate& qgen = templates.get(llm::tmpl::kPreciseQGen);
    const llm::PromptTemplate& answerability = templates.get(llm::tmpl::kPreciseAnswerability);
    std::string section_text = source.section.text;
    std::string last_reason = "no attempts made";

    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        std::string question = trim(client.complete(
            qgen_endpoint,
            llm::render(qgen, {{"wiki_title", source.page->title}, {"section", section_text}}),
            options.qgen_params, qgen.digest));
        if (question.empty()) {
            last_reason = "empty question";
            continue;
        }
        std::string answer = trim(client.complete(
            answer_endpoint,
            llm::render(answerability, {{"reference_document", section_text}, {"question", question}}),
            options.answer_params, answerability.digest));
        std::string norm = to_lower(answer);
        if (norm.rfind("unanswerable", 0) == 0 || answer.empty()) {
            last_reason = "unanswerable";
            continue;
        }
        if (count_whitespace_tokens(answer) > options.gold_answer_max_tokens) {
            last_reason = "gold answer over " + std::to_string(options.gold_answer_max_tokens) + " tokens";
            continue;
        }
        QAItem item;
        item.page_id = source.page->page_id;
        item.item_id = source.page->page_id + ":s" + std::to_string(source.section_index);
        item.difficulty_bin = source.page->difficulty_bin;
        item.section_heading = source.section.heading;
        item.question = question;
        item.gold_answer = answer;
        item.trial_seed = trial_seed;
        return item;
    }
    if (reject_reason) *reject_reason = last_reason;
    return std::nullopt;
}

QAGenResult generate_test_set(const corpus::PageStore& store, llm::LlmClient& client,
                              const std::string& qgen_endpoint, const std::string& answer_endpoint,
                              const llm::TemplateLibrary& templates, const GenOptions& options,
                              std::uint64_t seed) {
    std::vector<SourceSelection> sources = select_sources(store, options.per_bin, seed);
    QAGenResult result;
    std::vector<std::optional<QAItem>> slots(sources.size());
    std::vector<std::string> reasons(sources.size());
    parallel_for_indexed(sources.size(), options.workers, [&](std::size_t i) {
        slots[i] = generate_qa(sources[i], client, qgen_endpoint, answer_endpoint, templates, options, seed,
                               &reasons[i]);
    });
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i]) result.items.push_back(std::move(*slots[i]));
        else result.rejections.push_back({sources[i].page->page_id, reasons[i]});
    }
    return result;
}

std::vector<ResponseRecord> run_inference(const std::vector<QAItem>& items, llm::LlmClient& client,
                                          const std::string& tested_endpoint,
                                          const llm::GenerationParams& params, std::size_t workers) {
    if (items.empty()) throw std::runtime_error("run_inference: no items");
    std::vector<ResponseRecord> records(items.size());
    parallel_for_indexed(items.size(), workers, [&](std::size_t i) {
        ResponseRecord& r = records[i];
        r.item_id = items[i].item_id;
        r.prompt_text = items[i].question;
        r.endpoint = tested_endpoint;
        r.params = params;
        try {
            r.text = client.complete(tested_endpoint, {{llm::Role::user, items[i].question}}, params);
        } catch (const std::exception& e) {
            r.errored = true;
            r.error = e.what();
        }
    });
    return records;
}

RefusalVerdict judge_abstention(const QAItem& item, const ResponseRecord& response, llm::LlmClient& client,
                                const std::string& judge_endpoint, const llm::TemplateLibrary& templates,
                                const llm::GenerationParams& params) {
    llm::JudgeReply reply =
        llm::run_json_judge(client, judge_endpoint, templates.get(llm::tmpl::kAbstention),
                            {{"prompt", item.question}, {"generation", response.text}}, {"is_abstaining"},
                            params);
    RefusalVerdict v;
    v.item_id = item.item_id;
    v.raw_judge_text = reply.raw;
    // sentinel: treat unparseable judges as non-refusal (pessimistic for the model)
    v.is_abstaining = reply.verdict && (*reply.verdict)["is_abstaining"].is_boolean()
                          ? (*reply.verdict)["is_abstaining"].get<bool>()
                          : false;
    return v;
}

CorrectnessVerdict judge_correctness(const QAItem& item, const ResponseRecord& response,
                                     llm::LlmClient& client, const std::string& judge_endpoint,
                                     const llm::TemplateLibrary& templates,
                                     const llm::GenerationParams& params) {
    const llm::PromptTemplate& tmpl = templates.get(llm::tmpl::kPreciseCorrectness);
    CorrectnessVerdict v;
    v.item_id = item.item_id;
    std::map<std::string, std::string> vars{
        {"prompt", item.question}, {"generation", response.text}, {"gold_answer", item.gold_answer}};
    auto parse_label = [](const std::string& text) -> std::optional<CorrectnessLabel> {
        std::string upper;
        for (char c : text) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        // INCORRECT must be probed before CORRECT (substring containment)
        if (upper.find("INCORRECT") != std::string::npos) return CorrectnessLabel::INCORRECT;
        if (upper.find("UNVERIFIABLE") != std::string::npos) return CorrectnessLabel::UNVERIFIABLE;
        if (upper.find("CORRECT") != std::string::npos) return CorrectnessLabel::CORRECT;
        return std::nullopt;
    };
    std::vector<llm::ChatMessage> messages = llm::render(tmpl, vars);
    v.raw_judge_text = client.complete(judge_endpoint, messages, params, tmpl.digest);
    if (auto label = parse_label(v.raw_judge_text)) {
        v.label = *label;
        return v;
    }
    client.stats().verdict_retries.fetch_add(1);
    messages[0].content += "\n\nAnswer with exactly one of: CORRECT, INCORRECT, UNVERIFIABLE.";
    v.raw_judge_text = client.complete(judge_endpoint, messages, params, tmpl.digest);
    if (auto label = parse_label(v.raw_judge_text)) {
        v.label = *label;
        return v;
    }
    client.stats().verdict_sentinels.fetch_add(1);
    v.label = CorrectnessLabel::UNVERIFIABLE;  // sentinel
    return v;
}

namespace {

void fill_rates(const PreciseCounts& c, metrics::MetricValue& frr, metrics::MetricValue& h,
                metrics::MetricValue& car) {
    if (c.n_total == 0) {
        frr = {0.0, false};
        h = {0.0, false};
        car = {0.0, false};
        return;
    }
    double total = static_cast<double>(c.n_total);
    frr = {static_cast<double>(c.n_refused) / total, true};
    car = {static_cast<double>(c.n_correct) / total, true};
    std::size_t attempted = c.n_total - c.n_refused;
    if (attempted == 0) {
        h = {0.0, false};  // all refused: undefined, not 0
    } else {
        h = {static_cast<double>(c.n_incorrect + c.n_unverifiable) / static_cast<double>(attempted), true};
    }
}

}  // namespace

metrics::MetricMap PreciseMetrics::to_metric_map(bool include_bins) const {
    metrics::MetricMap m;
    m["false_refusal_rate"] = false_refusal_rate;
    m["hallucination_rate_not_refused"] = hallucination_rate_not_refused;
    m["correct_answer_rate"] = correct_answer_rate;
    if (include_bins) {
        for (const auto& [bin, counts] : per_bin_counts) {
            metrics::MetricValue frr, h, car;
            fill_rates(counts, frr, h, car);
            std::string suffix = ".bin" + std::to_string(bin);
            m["false_refusal_rate" + suffix] = frr;
            m["hallucination_rate_not_refused" + suffix] = h;
            m["correct_answer_rate" + suffix] = car;
        }
    }
    return m;
}

json PreciseMetrics::to_json() const {
    auto counts_json = [](const PreciseCounts& c) {
        return json{{"n_total", c.n_total},         {"n_refused", c.n_refused},
                    {"n_correct", c.n_correct},     {"n_incorrect", c.n_incorrect},
                    {"n_unverifiable", c.n_unverifiable}, {"n_errored", c.n_errored}};
    };
    json per_bin = json::object();
    for (const auto& [bin, c] : per_bin_counts) {
        metrics::MetricValue frr, h, car;
        fill_rates(c, frr, h, car);
        per_bin[std::to_string(bin)] = json{{"counts", counts_json(c)},
                                            {"false_refusal_rate", metrics::json_metric(frr)},
                                            {"hallucination_rate_not_refused", metrics::json_metric(h)},
                                            {"correct_answer_rate", metrics::json_metric(car)}};
    }
    return json{{"global",
                 json{{"false_refusal_rate", metrics::json_metric(false_refusal_rate)},
                      {"hallucination_rate_not_refused", metrics::json_metric(hallucination_rate_not_refused)},
                      {"correct_answer_rate", metrics::json_metric(correct_answer_rate)}}},
                {"counts", counts_json(counts)},
                {"per_bin", per_bin}};
}

PreciseMetrics score(const std::vector<QAItem>& items, const std::vector<ResponseRecord>& responses,
                     const std::vector<RefusalVerdict>& refusals,
                     const std::vector<CorrectnessVerdict>& correctness) {
    std::map<std::string, const QAItem*> item_by_id;
    for (const QAItem& it : items) item_by_id[it.item_id] = &it;
    std::map<std::string, bool> refused;
    for (const RefusalVerdict& v : refusals) refused[v.item_id] = v.is_abstaining;
    std::map<std::string, CorrectnessLabel> labels;
    for (const CorrectnessVerdict& v : correctness) labels[v.item_id] = v.label;

    PreciseMetrics out;
    for (const ResponseRecord& r : responses) {
        auto item_it = item_by_id.find(r.item_id);
        if (item_it == item_by_id.end()) throw std::runtime_error("response for unknown item " + r.item_id);
        int bin = item_it->second->difficulty_bin;
        PreciseCounts& bc = out.per_bin_counts[bin];
        if (r.errored) {
            ++out.counts.n_errored;
            ++bc.n_errored;
            continue;
        }
        auto ref_it = refused.find(r.item_id);
        if (ref_it == refused.end()) throw std::runtime_error("missing refusal verdict for " + r.item_id);
        ++out.counts.n_total;
        ++bc.n_total;
        if (ref_it->second) {
            ++out.counts.n_refused;
            ++bc.n_refused;
            continue;
        }
        auto lab_it = labels.find(r.item_id);
        if (lab_it == labels.end())
            throw std::runtime_error("missing correctness verdict for non-refused item " + r.item_id);
        switch (lab_it->second) {
            case CorrectnessLabel::CORRECT: ++out.counts.n_correct; ++bc.n_correct; break;
            case CorrectnessLabel::INCORRECT: ++out.counts.n_incorrect; ++bc.n_incorrect; break;
            case CorrectnessLabel::UNVERIFIABLE: ++out.counts.n_unverifiable; ++bc.n_unverifiable; break;
        }
    }
    fill_rates(out.counts, out.false_refusal_rate, out.hallucination_rate_not_refused,
               out.correct_answer_rate);
    return out;
}

}  // namespace hallulens::precise
