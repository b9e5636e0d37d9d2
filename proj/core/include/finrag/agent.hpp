#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "finrag/answer.hpp"
#include "finrag/index.hpp"
#include "finrag/llm.hpp"
#include "finrag/mining.hpp"
#include "finrag/reason.hpp"
#include "finrag/router.hpp"
#include "finrag/verify.hpp"

namespace finrag::agent {

class AgentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Relevance-recency priority: score + beta * iteration / K.
double evidence_priority(double score, int iteration, int max_iterations, double beta);

std::uint64_t normalized_text_hash(std::string_view text);

struct BufferEntry {
    corpus::Passage passage;
    double retrieval_score = 0.0;
    int iteration_added = 0;
};

/// Capacity-bounded passage set deduplicated by whitespace-normalized text
/// hash. When an add overflows capacity the lowest-priority entry is evicted
/// (priority ties evicted by passage id descending).
class EvidenceBuffer {
public:
    explicit EvidenceBuffer(size_t capacity = 15);

    /// Returns true when the passage is in the buffer afterwards.
    bool add(const corpus::Passage& passage, double score, int iteration, int max_iterations,
             double beta);

    /// Keeps only the n highest-priority entries (turn-boundary pruning).
    void prune_to_top(size_t n, int max_iterations, double beta);

    std::set<std::string> passage_ids() const;
    std::vector<std::string> texts() const;  // insertion order
    const std::vector<BufferEntry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }
    size_t capacity() const { return capacity_; }
    bool contains_text(std::string_view text) const;

private:
    size_t capacity_;
    std::vector<BufferEntry> entries_;
};

struct AgentConfig {
    int max_iterations = 3;             // K
    double confidence_threshold = 0.8;  // theta
    double beta = 0.2;
    size_t buffer_capacity = 15;
    size_t turn_prune_size = 10;
    index::HybridConfig retrieval;      // carries top_k and alpha
    std::string router_mode = "heuristic";  // off | heuristic | model

    void validate() const;
};

enum class Termination { VerifierAccept, Confidence, MaxIterations };

std::string to_string(Termination t);

struct RetrievalRecord {
    int sub_question_order = 0;
    std::string query;
    std::vector<index::RetrievalResult> results;
};

struct IterationRecord {
    int k = 0;
    std::vector<reason::SubQuestion> sub_questions;
    std::vector<RetrievalRecord> retrievals;
    std::string mode = "none";  // cot | pot | pot_fallback_cot | none
    std::optional<reason::ReasoningOutcome> outcome;
    std::optional<verify::Verdict> verdict;
    int llm_calls = 0;
    long tokens = 0;
    long latency_ms = 0;
    double cost = 0.0;
    std::string error;
};

struct AgentTrace {
    static constexpr int kSchemaVersion = 1;
    std::string question_id;
    std::string question;
    router::RouteDecision route;
    std::vector<IterationRecord> iterations;
    answer::AnswerValue final_answer;
    Termination termination = Termination::MaxIterations;
    int total_llm_calls = 0;
    long total_tokens = 0;
    long latency_ms = 0;
    double total_cost = 0.0;
    std::optional<std::string> conversation_id;
    std::optional<int> turn_index;
};

nlohmann::json trace_to_json(const AgentTrace& trace);

struct TurnResult {
    answer::AnswerValue answer;
    AgentTrace trace;
};

struct AgentBackends {
    std::shared_ptr<llm::LlmBackend> backend;
    std::shared_ptr<llm::UsageLedger> ledger;  // global accounting (optional)
    llm::CostModel cost;
    std::optional<calibration::CalibrationModel> calibration;
    std::optional<router::RouterModel> router_model;
};

/// One question/conversation per session, strictly sequential inside the
/// session; sessions share the immutable index and thread-safe backends.
class Agent {
public:
    Agent(const index::Index& idx, AgentConfig cfg, AgentBackends backends,
          mining::Lexicon lexicon);

    /// Decompose; loop k=1..K {retrieve per retrieval-tagged sub-question
    /// excluding buffered ids; reason (PoT with CoT fallback when the
    /// decomposition contains a computation step, CoT otherwise); verify;
    /// stop on ACCEPT or calibrated confidence > theta; else refine}. At
    /// exhaustion the final iteration's answer is returned. Routed-simple
    /// questions take one retrieval pass plus direct PoT with no
    /// verification loop.
    TurnResult run_question(const std::string& question, const std::string& question_id = "");

    /// Evidence buffer persists across turns, pruned to the top
    /// turn_prune_size entries at each turn start; decomposer and verifier
    /// receive the running [q1, a1, ..., qt] history; the iteration counter
    /// resets per turn. Per-turn errors are isolated.
    std::vector<TurnResult> run_conversation(const std::vector<std::string>& turns,
                                             const std::string& conversation_id = "");

    const AgentConfig& config() const { return cfg_; }

private:
    friend class ConversationSession;

    TurnResult run_one(const std::string& question, const std::string& question_id,
                       EvidenceBuffer& buffer, const std::string& history);

    void retrieve_for(const std::vector<reason::SubQuestion>& subqs, EvidenceBuffer& buffer,
                      int iteration, IterationRecord& record);

    const index::Index& index_;
    AgentConfig cfg_;
    AgentBackends backends_;
    mining::Lexicon lexicon_;
};

/// Incremental multi-turn session over one agent: the REPL-facing form of
/// run_conversation.
class ConversationSession {
public:
    ConversationSession(Agent& agent, std::string conversation_id);

    TurnResult ask(const std::string& question);
    void reset();
    const std::string& history() const { return history_; }
    int turns() const { return turn_; }

private:
    Agent& agent_;
    std::string conversation_id_;
    EvidenceBuffer buffer_;
    std::string history_;
    int turn_ = 0;
};

}  // namespace finrag::agent
