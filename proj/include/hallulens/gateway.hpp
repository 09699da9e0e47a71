#pragma once

#include "hallulens/templates.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hallulens::llm {

enum class Role { system, user, assistant };

std::string role_name(Role role);
Role role_from_name(const std::string& name);

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

struct GenerationParams {
    double temperature = 0.0;  // harness decoding defaults
    double top_p = 1.0;
    int max_tokens = 512;
    std::optional<std::int64_t> seed;
};

inline GenerationParams params_with_max_tokens(int max_tokens) {
    GenerationParams p;
    p.max_tokens = max_tokens;
    return p;
}

struct MockRule {
    enum class Match { exact, contains, regex };
    Match match = Match::contains;
    std::string pattern;
    // Reply may contain {PROMPT_SHA8}, replaced with the first 8 hex chars of
    // sha256(prompt) so scripted mocks can mint distinct deterministic names.
    std::string reply;
};

struct Endpoint {
    std::string name;
    std::string base_url;    // e.g. http://host:8000/v1
    std::string model_id;
    std::string api_key_env; // env var holding the bearer token; may be empty
    int concurrency_limit = 4;
    enum class Backend { http, mock } backend = Backend::http;
    std::vector<MockRule> mock_rules;
    std::optional<std::string> mock_default_reply;
};

// Retries exhausted / connection-level failure.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Non-retryable endpoint reply (4xx, malformed body, mock with no matching rule).
struct EndpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VerdictParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GatewayStats {
    std::atomic<std::uint64_t> cache_hits{0};
    std::atomic<std::uint64_t> network_calls{0};  // backend invocations (mock included)
    std::atomic<std::uint64_t> retries{0};
    std::atomic<std::uint64_t> verdict_retries{0};
    std::atomic<std::uint64_t> verdict_sentinels{0};
};

// Uniform chat-completion access with a content-addressed response cache.
// complete() is safe to call from many workers; in-flight requests per
// endpoint are bounded by its concurrency_limit.
class LlmClient {
public:
    struct Options {
        std::filesystem::path cache_dir;  // empty => caching off
        int max_retries = 5;
        int backoff_initial_ms = 250;
        int backoff_max_ms = 8000;
    };

    LlmClient();
    explicit LlmClient(Options options);
    ~LlmClient();

    void register_endpoint(Endpoint endpoint);
    const Endpoint& endpoint(const std::string& name) const;
    bool has_endpoint(const std::string& name) const;

    // Returns assistant text. cache_salt participates in the cache key; pass
    // the rendering template digest so edited prompts invalidate stale entries.
    std::string complete(const std::string& endpoint_name, const std::vector<ChatMessage>& messages,
                         const GenerationParams& params, std::string_view cache_salt = {});

    GatewayStats& stats() { return stats_; }

private:
    struct EndpointState;
    std::string complete_uncached(EndpointState& state, const std::vector<ChatMessage>& messages,
                                  const GenerationParams& params);
    std::string mock_reply(const Endpoint& ep, const std::string& prompt) const;

    Options options_;
    std::map<std::string, std::unique_ptr<EndpointState>> endpoints_;
    GatewayStats stats_;
    std::mutex cache_write_mu_;
};

// Renders a template into the single user message the judges and generators use.
std::vector<ChatMessage> render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& vars);

// Extracts the first JSON object embedded in text and validates that every
// expected key is present with a boolean or string value. Throws
// VerdictParseError otherwise; callers own the retry-or-default policy.
nlohmann::json parse_json_verdict(const std::string& text, const std::set<std::string>& expected_keys);

struct JudgeReply {
    std::string raw;                        // last raw judge text
    std::optional<nlohmann::json> verdict;  // nullopt after two parse failures
};

// Judge-call policy: one completion, on parse failure retry once with
// "Reply with valid JSON only." appended, then give up (caller substitutes the
// task's sentinel verdict).
JudgeReply run_json_judge(LlmClient& client, const std::string& endpoint_name, const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& vars,
                          const std::set<std::string>& expected_keys, const GenerationParams& params);

}  // namespace hallulens::llm
