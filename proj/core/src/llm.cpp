#include "finrag/llm.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "finrag/corpus.hpp"

namespace finrag::llm {

std::string to_string(CallTag tag) {
    switch (tag) {
        case CallTag::Decompose: return "decompose";
        case CallTag::Cot: return "cot";
        case CallTag::Pot: return "pot";
        case CallTag::Repair: return "repair";
        case CallTag::VerifySuff: return "verify_suff";
        case CallTag::VerifyCross: return "verify_cross";
        case CallTag::Refine: return "refine";
    }
    return "cot";
}

std::optional<CallTag> call_tag_from_string(std::string_view s) {
    if (s == "decompose") return CallTag::Decompose;
    if (s == "cot") return CallTag::Cot;
    if (s == "pot") return CallTag::Pot;
    if (s == "repair") return CallTag::Repair;
    if (s == "verify_suff") return CallTag::VerifySuff;
    if (s == "verify_cross") return CallTag::VerifyCross;
    if (s == "refine") return CallTag::Refine;
    return std::nullopt;
}

int approx_token_count(std::string_view text) {
    return corpus::count_tokens(text);
}

void UsageLedger::record(CallTag tag, const LlmResponse& r, const CostModel& cost) {
    std::lock_guard lock(mutex_);
    ++state_.calls_by_tag[to_string(tag)];
    ++state_.total_calls;
    state_.total_prompt_tokens += r.prompt_tokens;
    state_.total_completion_tokens += r.completion_tokens;
    state_.total_tokens += r.prompt_tokens + r.completion_tokens;
    state_.total_latency_ms += r.latency_ms;
    state_.estimated_cost += cost.cost_of(r);
}

void UsageLedger::merge(const Snapshot& other) {
    std::lock_guard lock(mutex_);
    for (const auto& [tag, n] : other.calls_by_tag) state_.calls_by_tag[tag] += n;
    state_.total_calls += other.total_calls;
    state_.total_prompt_tokens += other.total_prompt_tokens;
    state_.total_completion_tokens += other.total_completion_tokens;
    state_.total_tokens += other.total_tokens;
    state_.total_latency_ms += other.total_latency_ms;
    state_.estimated_cost += other.estimated_cost;
}

UsageLedger::Snapshot UsageLedger::snapshot() const {
    std::lock_guard lock(mutex_);
    return state_;
}

long UsageLedger::total_calls() const {
    std::lock_guard lock(mutex_);
    return state_.total_calls;
}

ScriptedRules ScriptedRules::parse(const nlohmann::json& j) {
    ScriptedRules out;
    const nlohmann::json& rules = j.is_array() ? j : j.at("rules");
    for (const auto& jr : rules) {
        ScriptedRule r;
        if (jr.contains("tag")) {
            auto tag = call_tag_from_string(jr["tag"].get<std::string>());
            if (!tag) throw LlmError("unknown rule tag: " + jr["tag"].get<std::string>());
            r.tag = tag;
        }
        if (jr.contains("match")) r.match = jr["match"].get<std::string>();
        if (jr.contains("pattern")) r.pattern = jr["pattern"].get<std::string>();
        if (jr.contains("nth")) r.nth = jr["nth"].get<int>();
        if (!jr.contains("response")) throw LlmError("scripted rule missing response");
        r.response = jr["response"].get<std::string>();
        out.rules.push_back(std::move(r));
    }
    return out;
}

ScriptedRules ScriptedRules::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LlmError("cannot open scripted rules file: " + path);
    nlohmann::json j;
    in >> j;
    return parse(j);
}

ScriptedBackend::ScriptedBackend(ScriptedRules rules) : rules_(std::move(rules)) {
    compiled_.reserve(rules_.rules.size());
    for (const auto& r : rules_.rules) {
        compiled_.emplace_back(r.pattern ? *r.pattern : std::string("."),
                               std::regex::ECMAScript);
    }
    hits_.assign(rules_.rules.size(), 0);
}

void ScriptedBackend::reset_counters() {
    std::lock_guard lock(mutex_);
    hits_.assign(rules_.rules.size(), 0);
}

LlmResponse ScriptedBackend::complete(const LlmRequest& req) {
    std::lock_guard lock(mutex_);
    for (size_t i = 0; i < rules_.rules.size(); ++i) {
        const auto& r = rules_.rules[i];
        if (r.tag && *r.tag != req.tag) continue;
        if (r.match && req.prompt.find(*r.match) == std::string::npos) continue;
        if (r.pattern && !std::regex_search(req.prompt, compiled_[i])) continue;
        ++hits_[i];
        if (r.nth && hits_[i] != *r.nth) continue;
        LlmResponse resp;
        resp.text = r.response;
        resp.prompt_tokens = approx_token_count(req.prompt);
        resp.completion_tokens = approx_token_count(r.response);
        resp.latency_ms = 0;
        return resp;
    }
    std::ostringstream os;
    os << "unscripted call: tag=" << to_string(req.tag) << " prompt=\""
       << req.prompt.substr(0, 160) << (req.prompt.size() > 160 ? "..." : "") << "\"";
    throw UnscriptedCallError(os.str());
}

HttpBackend::HttpBackend(HttpBackendConfig cfg, std::shared_ptr<http::HttpTransport> transport,
                         Sleeper sleeper)
    : cfg_(std::move(cfg)),
      transport_(transport ? std::move(transport) : http::make_default_transport()),
      sleeper_(sleeper ? std::move(sleeper) : [](double s) {
          std::this_thread::sleep_for(std::chrono::duration<double>(s));
      }) {}

LlmResponse HttpBackend::complete(const LlmRequest& req) {
    nlohmann::json body{
        {"model", cfg_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
        {"temperature", req.temperature},
        {"max_tokens", req.max_tokens}};
    std::map<std::string, std::string> headers;
    if (!cfg_.api_key.empty()) headers["Authorization"] = "Bearer " + cfg_.api_key;

    http::HttpResult res;
    const auto start = std::chrono::steady_clock::now();
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        res = transport_->post(cfg_.endpoint, body.dump(), headers);
        if (res.status == 200) break;
        if (!http::is_retryable_status(res.status) || attempt == cfg_.max_attempts) {
            throw LlmError("llm request failed with status " + std::to_string(res.status) +
                           (res.error.empty() ? "" : ": " + res.error));
        }
        const auto& delays = cfg_.backoff_seconds;
        const size_t di = std::min(static_cast<size_t>(attempt - 1),
                                   delays.empty() ? size_t{0} : delays.size() - 1);
        sleeper_(delays.empty() ? 0.0 : delays[di]);
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);

    nlohmann::json j = nlohmann::json::parse(res.body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
        throw LlmError("malformed chat completion response");
    }
    LlmResponse out;
    out.text = j["choices"][0].at("message").at("content").get<std::string>();
    if (j.contains("usage")) {
        out.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        out.completion_tokens = j["usage"].value("completion_tokens", 0);
    } else {
        out.prompt_tokens = approx_token_count(req.prompt);
        out.completion_tokens = approx_token_count(out.text);
    }
    out.latency_ms = static_cast<int>(elapsed.count());
    return out;
}

LlmClient::LlmClient(std::shared_ptr<LlmBackend> backend, std::shared_ptr<UsageLedger> ledger,
                     CostModel cost)
    : backend_(std::move(backend)), ledger_(std::move(ledger)), cost_(cost) {
    if (!backend_) throw LlmError("LlmClient requires a backend");
    if (!ledger_) ledger_ = std::make_shared<UsageLedger>();
}

LlmResponse LlmClient::complete(const LlmRequest& req) {
    LlmResponse resp = backend_->complete(req);
    ledger_->record(req.tag, resp, cost_);
    return resp;
}

}  // namespace finrag::llm
