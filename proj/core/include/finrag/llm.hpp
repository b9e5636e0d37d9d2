#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "finrag/http.hpp"

namespace finrag::llm {

class LlmError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by the scripted backend when no rule matches; a test aid that
/// pinpoints the unscripted call.
class UnscriptedCallError : public LlmError {
public:
    using LlmError::LlmError;
};

enum class CallTag { Decompose, Cot, Pot, Repair, VerifySuff, VerifyCross, Refine };

std::string to_string(CallTag tag);
std::optional<CallTag> call_tag_from_string(std::string_view s);

struct LlmRequest {
    std::string prompt;
    double temperature = 0.0;  // all agent calls are greedy
    int max_tokens = 1024;
    CallTag tag = CallTag::Cot;
};

struct LlmResponse {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    int latency_ms = 0;
};

struct CostModel {
    double input_per_1k = 0.002;   // config example anchored to a ~$0.003
    double output_per_1k = 0.004;  // single-call zero-shot budget

    double cost_of(const LlmResponse& r) const {
        return r.prompt_tokens / 1000.0 * input_per_1k +
               r.completion_tokens / 1000.0 * output_per_1k;
    }
};

/// Per-tag and total usage accounting; accumulation is atomic so totals are
/// exact under concurrent completion calls.
class UsageLedger {
public:
    struct Snapshot {
        std::map<std::string, long> calls_by_tag;
        long total_calls = 0;
        long total_prompt_tokens = 0;
        long total_completion_tokens = 0;
        long total_tokens = 0;
        long total_latency_ms = 0;
        double estimated_cost = 0.0;
    };

    void record(CallTag tag, const LlmResponse& r, const CostModel& cost);
    void merge(const Snapshot& other);
    Snapshot snapshot() const;
    long total_calls() const;

private:
    mutable std::mutex mutex_;
    Snapshot state_;
};

/// Thread-safe chat-completion backend.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual LlmResponse complete(const LlmRequest& req) = 0;
};

struct ScriptedRule {
    std::optional<CallTag> tag;
    std::optional<std::string> match;    // substring of the prompt
    std::optional<std::string> pattern;  // ECMAScript regex
    std::optional<int> nth;              // match only the nth call satisfying the conditions
    std::string response;
};

struct ScriptedRules {
    std::vector<ScriptedRule> rules;

    static ScriptedRules parse(const nlohmann::json& j);
    static ScriptedRules load(const std::string& path);
};

/// Deterministic rule-lookup backend: first matching rule wins; a rule with an
/// nth index fires only on the nth call that satisfies its other conditions.
/// Rule-hit counters are per-backend-instance (per session). Performs no
/// network activity by construction.
class ScriptedBackend : public LlmBackend {
public:
    explicit ScriptedBackend(ScriptedRules rules);
    LlmResponse complete(const LlmRequest& req) override;
    void reset_counters();

private:
    ScriptedRules rules_;
    std::vector<std::regex> compiled_;
    std::vector<long> hits_;
    std::mutex mutex_;
};

struct HttpBackendConfig {
    std::string endpoint;  // chat-completions URL
    std::string model;
    std::string api_key;
    int max_attempts = 3;
    // Backoff before retry i (seconds); the tail value repeats if more
    // attempts are configured.
    std::vector<double> backoff_seconds{0.5, 1.0, 2.0};
};

/// Chat-completions wire shape:
///   {model, messages:[{role,content}], temperature, max_tokens}
///   -> {choices:[{message:{content}}], usage:{prompt_tokens, completion_tokens}}
/// Retries timeouts/429/5xx with exponential backoff, then fails.
class HttpBackend : public LlmBackend {
public:
    using Sleeper = std::function<void(double seconds)>;
    HttpBackend(HttpBackendConfig cfg, std::shared_ptr<http::HttpTransport> transport = nullptr,
                Sleeper sleeper = nullptr);
    LlmResponse complete(const LlmRequest& req) override;

private:
    HttpBackendConfig cfg_;
    std::shared_ptr<http::HttpTransport> transport_;
    Sleeper sleeper_;
};

/// Backend wrapper that records every completion in a shared ledger.
class LlmClient {
public:
    LlmClient(std::shared_ptr<LlmBackend> backend, std::shared_ptr<UsageLedger> ledger,
              CostModel cost = {});

    LlmResponse complete(const LlmRequest& req);
    const CostModel& cost_model() const { return cost_; }
    UsageLedger& ledger() { return *ledger_; }
    const UsageLedger& ledger() const { return *ledger_; }
    std::shared_ptr<LlmBackend> backend() const { return backend_; }

private:
    std::shared_ptr<LlmBackend> backend_;
    std::shared_ptr<UsageLedger> ledger_;
    CostModel cost_;
};

int approx_token_count(std::string_view text);

}  // namespace finrag::llm
