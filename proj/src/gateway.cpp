#include "hallulens/gateway.hpp"

#include "hallulens/util.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <iostream>
#include <regex>
#include <thread>

namespace hallulens::llm {

using nlohmann::json;

std::string role_name(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

Role role_from_name(const std::string& name) {
    if (name == "system") return Role::system;
    if (name == "assistant") return Role::assistant;
    if (name == "user") return Role::user;
    throw std::runtime_error("unknown chat role: " + name);
}

namespace {

// Counting semaphore with a runtime limit (std::counting_semaphore fixes the
// ceiling at compile time).
class Semaphore {
public:
    explicit Semaphore(int count) : count_(count) {}
    void acquire() {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return count_ > 0; });
        --count_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++count_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int count_;
};

struct SemaphoreGuard {
    explicit SemaphoreGuard(Semaphore& s) : sem(s) { sem.acquire(); }
    ~SemaphoreGuard() { sem.release(); }
    Semaphore& sem;
};

json params_json(const GenerationParams& p) {
    json j{{"temperature", p.temperature}, {"top_p", p.top_p}, {"max_tokens", p.max_tokens}};
    if (p.seed) j["seed"] = *p.seed;
    return j;
}

json messages_json(const std::vector<ChatMessage>& messages) {
    json arr = json::array();
    for (const ChatMessage& m : messages) arr.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    return arr;
}

std::string join_prompt(const std::vector<ChatMessage>& messages) {
    std::string out;
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (i) out += "\n";
        out += messages[i].content;
    }
    return out;
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

}  // namespace

struct LlmClient::EndpointState {
    Endpoint config;
    std::unique_ptr<Semaphore> slots;
    explicit EndpointState(Endpoint ep)
        : config(std::move(ep)), slots(std::make_unique<Semaphore>(std::max(1, config.concurrency_limit))) {}
};

LlmClient::LlmClient() : LlmClient(Options{}) {}

LlmClient::~LlmClient() = default;

LlmClient::LlmClient(Options options) : options_(std::move(options)) {
    if (!options_.cache_dir.empty()) std::filesystem::create_directories(options_.cache_dir);
}

void LlmClient::register_endpoint(Endpoint endpoint) {
    if (endpoint.name.empty()) throw std::runtime_error("endpoint needs a name");
    auto state = std::make_unique<EndpointState>(std::move(endpoint));
    const std::string name = state->config.name;
    if (!endpoints_.emplace(name, std::move(state)).second)
        throw std::runtime_error("endpoint registered twice: " + name);
}

const Endpoint& LlmClient::endpoint(const std::string& name) const {
    auto it = endpoints_.find(name);
    if (it == endpoints_.end()) throw std::runtime_error("unknown endpoint: " + name);
    return it->second->config;
}

bool LlmClient::has_endpoint(const std::string& name) const { return endpoints_.count(name) > 0; }

std::string LlmClient::mock_reply(const Endpoint& ep, const std::string& prompt) const {
    const MockRule* hit = nullptr;
    for (const MockRule& rule : ep.mock_rules) {
        bool match = false;
        switch (rule.match) {
            case MockRule::Match::exact: match = (prompt == rule.pattern); break;
            case MockRule::Match::contains: match = (prompt.find(rule.pattern) != std::string::npos); break;
            case MockRule::Match::regex: match = std::regex_search(prompt, std::regex(rule.pattern)); break;
        }
        if (match) {
            hit = &rule;
            break;
        }
    }
    std::string reply;
    if (hit) {
        reply = hit->reply;
    } else if (ep.mock_default_reply) {
        reply = *ep.mock_default_reply;
    } else {
        throw EndpointError("mock endpoint " + ep.name + " has no rule matching the prompt");
    }
    const std::string token = "{PROMPT_SHA8}";
    std::size_t pos;
    std::string sha;
    while ((pos = reply.find(token)) != std::string::npos) {
        if (sha.empty()) sha = sha256_hex(prompt).substr(0, 8);
        reply.replace(pos, token.size(), sha);
    }
    return reply;
}

std::string LlmClient::complete_uncached(EndpointState& state, const std::vector<ChatMessage>& messages,
                                         const GenerationParams& params) {
    const Endpoint& ep = state.config;
    if (ep.backend == Endpoint::Backend::mock) {
        stats_.network_calls.fetch_add(1);
        return mock_reply(ep, join_prompt(messages));
    }

    json body{{"model", ep.model_id},
              {"messages", messages_json(messages)},
              {"temperature", params.temperature},
              {"top_p", params.top_p},
              {"max_tokens", params.max_tokens}};
    if (params.seed) body["seed"] = *params.seed;
    const std::string payload = body.dump();

    // base_url = scheme://host[:port][/prefix]
    std::string base = ep.base_url, prefix;
    std::size_t scheme_end = base.find("://");
    std::size_t path_start = scheme_end == std::string::npos ? base.find('/') : base.find('/', scheme_end + 3);
    if (path_start != std::string::npos) {
        prefix = base.substr(path_start);
        base = base.substr(0, path_start);
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }
    httplib::Client cli(base);
    cli.set_connection_timeout(30);
    cli.set_read_timeout(600);
    httplib::Headers headers;
    if (!ep.api_key_env.empty()) {
        if (const char* key = std::getenv(ep.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    int delay_ms = options_.backoff_initial_ms;
    std::string last_error;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        if (attempt > 0) {
            stats_.retries.fetch_add(1);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms = std::min(delay_ms * 2, options_.backoff_max_ms);
        }
        SemaphoreGuard guard(*state.slots);
        stats_.network_calls.fetch_add(1);
        httplib::Result res = cli.Post(prefix + "/chat/completions", headers, payload, "application/json");
        if (!res) {
            last_error = "connection failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            try {
                json reply = json::parse(res->body);
                return reply.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const json::exception& e) {
                throw EndpointError("endpoint " + ep.name + " returned malformed body: " + e.what());
            }
        }
        if (!retryable_status(res->status)) {
            throw EndpointError("endpoint " + ep.name + " returned HTTP " + std::to_string(res->status));
        }
        last_error = "HTTP " + std::to_string(res->status);
    }
    throw TransportError("endpoint " + ep.name + " failed after " + std::to_string(options_.max_retries) +
                         " retries (" + last_error + ")");
}

std::string LlmClient::complete(const std::string& endpoint_name, const std::vector<ChatMessage>& messages,
                                const GenerationParams& params, std::string_view cache_salt) {
    if (messages.empty()) throw std::runtime_error("complete: messages must be non-empty");
    auto it = endpoints_.find(endpoint_name);
    if (it == endpoints_.end()) throw std::runtime_error("unknown endpoint: " + endpoint_name);
    EndpointState& state = *it->second;

    std::filesystem::path cache_path;
    json request{{"model", state.config.model_id},
                 {"messages", messages_json(messages)},
                 {"params", params_json(params)}};
    if (!cache_salt.empty()) request["template_digest"] = std::string(cache_salt);
    if (!options_.cache_dir.empty()) {
        cache_path = options_.cache_dir / (sha256_hex(request.dump()) + ".json");
        if (std::filesystem::exists(cache_path)) {
            try {
                json entry = json::parse(read_file(cache_path));
                std::string out = entry.at("response").get<std::string>();
                stats_.cache_hits.fetch_add(1);
                return out;
            } catch (const std::exception& e) {
                std::cerr << "[gateway] corrupt cache entry bypassed: " << cache_path << " (" << e.what()
                          << ")\n";
            }
        }
    }

    std::string out = complete_uncached(state, messages, params);

    if (!cache_path.empty()) {
        json entry{{"request", request},
                   {"response", out},
                   {"timestamp", static_cast<std::int64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                     std::chrono::system_clock::now().time_since_epoch())
                                     .count())}};
        std::lock_guard<std::mutex> lock(cache_write_mu_);
        write_file_atomic(cache_path, entry.dump());
    }
    return out;
}

std::vector<ChatMessage> render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& vars) {
    return {ChatMessage{Role::user, render_text(tmpl, vars)}};
}

nlohmann::json parse_json_verdict(const std::string& text, const std::set<std::string>& expected_keys) {
    for (std::size_t start = text.find('{'); start != std::string::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) {
                json obj;
                try {
                    obj = json::parse(text.substr(start, i - start + 1));
                } catch (const json::exception&) {
                    break;  // try the next '{'
                }
                if (!obj.is_object()) break;
                bool ok = true;
                for (const std::string& key : expected_keys) {
                    if (!obj.contains(key) || !(obj[key].is_boolean() || obj[key].is_string())) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) break;
                return obj;
            }
        }
    }
    throw VerdictParseError("no JSON object with expected keys in judge reply");
}

JudgeReply run_json_judge(LlmClient& client, const std::string& endpoint_name, const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& vars,
                          const std::set<std::string>& expected_keys, const GenerationParams& params) {
    JudgeReply out;
    std::vector<ChatMessage> messages = render(tmpl, vars);
    out.raw = client.complete(endpoint_name, messages, params, tmpl.digest);
    try {
        out.verdict = parse_json_verdict(out.raw, expected_keys);
        return out;
    } catch (const VerdictParseError&) {
    }
    client.stats().verdict_retries.fetch_add(1);
    messages[0].content += "\n\nReply with valid JSON only.";
    out.raw = client.complete(endpoint_name, messages, params, tmpl.digest);
    try {
        out.verdict = parse_json_verdict(out.raw, expected_keys);
    } catch (const VerdictParseError&) {
        client.stats().verdict_sentinels.fetch_add(1);
        out.verdict = std::nullopt;
    }
    return out;
}

}  // namespace hallulens::llm
