#include "finrag/agent.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace finrag::agent {

double evidence_priority(double score, int iteration, int max_iterations, double beta) {
    return score + beta * static_cast<double>(iteration) / static_cast<double>(max_iterations);
}

std::uint64_t normalized_text_hash(std::string_view text) {
    // Collapse whitespace runs and trim before hashing.
    std::string normalized;
    normalized.reserve(text.size());
    bool in_space = true;  // drops leading whitespace
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !normalized.empty()) normalized += ' ';
        in_space = false;
        normalized += c;
    }
    return embed::fnv1a64(normalized);
}

EvidenceBuffer::EvidenceBuffer(size_t capacity) : capacity_(capacity) {}

bool EvidenceBuffer::contains_text(std::string_view text) const {
    const std::uint64_t h = normalized_text_hash(text);
    for (const auto& e : entries_) {
        if (normalized_text_hash(e.passage.text) == h) return true;
    }
    return false;
}

bool EvidenceBuffer::add(const corpus::Passage& passage, double score, int iteration,
                         int max_iterations, double beta) {
    if (contains_text(passage.text)) return false;
    entries_.push_back({passage, score, iteration});
    if (entries_.size() <= capacity_) return true;

    // Evict the lowest-priority entry; ties evicted by passage id descending.
    size_t evict = 0;
    double evict_priority = 0.0;
    for (size_t i = 0; i < entries_.size(); ++i) {
        const double p = evidence_priority(entries_[i].retrieval_score,
                                           entries_[i].iteration_added, max_iterations, beta);
        if (i == 0 || p < evict_priority ||
            (p == evict_priority && entries_[i].passage.id > entries_[evict].passage.id)) {
            evict = i;
            evict_priority = p;
        }
    }
    const bool survived = entries_[evict].passage.id != passage.id;
    entries_.erase(entries_.begin() + static_cast<long>(evict));
    return survived;
}

void EvidenceBuffer::prune_to_top(size_t n, int max_iterations, double beta) {
    if (entries_.size() <= n) return;
    std::vector<size_t> order(entries_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const double pa = evidence_priority(entries_[a].retrieval_score,
                                            entries_[a].iteration_added, max_iterations, beta);
        const double pb = evidence_priority(entries_[b].retrieval_score,
                                            entries_[b].iteration_added, max_iterations, beta);
        if (pa != pb) return pa > pb;
        return entries_[a].passage.id < entries_[b].passage.id;
    });
    order.resize(n);
    std::sort(order.begin(), order.end());  // keep insertion order
    std::vector<BufferEntry> kept;
    kept.reserve(n);
    for (size_t i : order) kept.push_back(std::move(entries_[i]));
    entries_ = std::move(kept);
}

std::set<std::string> EvidenceBuffer::passage_ids() const {
    std::set<std::string> ids;
    for (const auto& e : entries_) ids.insert(e.passage.id);
    return ids;
}

std::vector<std::string> EvidenceBuffer::texts() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.passage.text);
    return out;
}

void AgentConfig::validate() const {
    if (max_iterations < 1) throw AgentError("max_iterations must be >= 1");
    if (confidence_threshold < 0.0 || confidence_threshold > 1.0) {
        throw AgentError("confidence_threshold must be in [0,1]");
    }
    if (buffer_capacity < 1) throw AgentError("buffer_capacity must be >= 1");
    if (turn_prune_size < 1) throw AgentError("turn_prune_size must be >= 1");
    retrieval.validate();
    if (router_mode != "off" && router_mode != "heuristic" && router_mode != "model") {
        throw AgentError("router_mode must be off, heuristic or model");
    }
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::VerifierAccept: return "verifier_accept";
        case Termination::Confidence: return "confidence";
        case Termination::MaxIterations: return "max_iterations";
    }
    return "max_iterations";
}

namespace {

nlohmann::json subquestion_to_json(const reason::SubQuestion& sq) {
    return nlohmann::json{{"text", sq.text},
                          {"tag", reason::to_string(sq.tag)},
                          {"pattern", reason::to_string(sq.pattern)},
                          {"order", sq.order}};
}

nlohmann::json outcome_to_json(const reason::ReasoningOutcome& o) {
    nlohmann::json j{{"answer", answer::answer_to_json(o.answer)},
                     {"raw_confidence", o.raw_confidence},
                     {"calibrated_confidence", o.calibrated_confidence},
                     {"mode", o.mode == reason::ReasoningMode::Pot ? "pot" : "cot"},
                     {"chain_or_program", o.chain_or_program},
                     {"repairs_used", o.repairs_used}};
    j["execution_value"] = o.execution_value ? nlohmann::json(*o.execution_value)
                                             : nlohmann::json(nullptr);
    return j;
}

nlohmann::json verdict_to_json(const verify::Verdict& v) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& c : v.failure_categories) failures.push_back(verify::to_string(c));
    return nlohmann::json{
        {"sufficiency", v.sufficiency},
        {"numeric", v.numeric},
        {"cross", v.cross},
        {"decision", v.decision == verify::Decision::Accept ? "ACCEPT" : "REJECT"},
        {"failure_categories", failures},
        {"explanations", v.explanations}};
}

}  // namespace

nlohmann::json trace_to_json(const AgentTrace& trace) {
    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& it : trace.iterations) {
        nlohmann::json subqs = nlohmann::json::array();
        for (const auto& sq : it.sub_questions) subqs.push_back(subquestion_to_json(sq));
        nlohmann::json retrievals = nlohmann::json::array();
        for (const auto& r : it.retrievals) {
            nlohmann::json results = nlohmann::json::array();
            for (const auto& res : r.results) {
                results.push_back(nlohmann::json{{"passage_id", res.passage_id},
                                                 {"dense_score", res.dense_score},
                                                 {"bm25_score_norm", res.bm25_score_norm},
                                                 {"hybrid_score", res.hybrid_score},
                                                 {"rank", res.rank}});
            }
            retrievals.push_back(nlohmann::json{{"sub_question_order", r.sub_question_order},
                                                {"query", r.query},
                                                {"results", results}});
        }
        nlohmann::json ji{{"k", it.k},
                          {"sub_questions", subqs},
                          {"retrievals", retrievals},
                          {"mode", it.mode},
                          {"llm_calls", it.llm_calls},
                          {"tokens", it.tokens},
                          {"latency_ms", it.latency_ms},
                          {"cost", it.cost}};
        ji["outcome"] = it.outcome ? outcome_to_json(*it.outcome) : nlohmann::json(nullptr);
        ji["verdict"] = it.verdict ? verdict_to_json(*it.verdict) : nlohmann::json(nullptr);
        if (!it.error.empty()) ji["error"] = it.error;
        iterations.push_back(std::move(ji));
    }
    nlohmann::json j{{"schema_version", AgentTrace::kSchemaVersion},
                     {"question_id", trace.question_id},
                     {"question", trace.question},
                     {"route", nlohmann::json{{"decision", router::to_string(trace.route.route)},
                                              {"score", trace.route.score}}},
                     {"iterations", iterations},
                     {"final_answer", answer::answer_to_json(trace.final_answer)},
                     {"termination", to_string(trace.termination)},
                     {"totals", nlohmann::json{{"llm_calls", trace.total_llm_calls},
                                               {"tokens", trace.total_tokens},
                                               {"latency_ms", trace.latency_ms},
                                               {"est_cost", trace.total_cost}}}};
    if (trace.conversation_id) j["conversation_id"] = *trace.conversation_id;
    if (trace.turn_index) j["turn_index"] = *trace.turn_index;
    return j;
}

Agent::Agent(const index::Index& idx, AgentConfig cfg, AgentBackends backends,
             mining::Lexicon lexicon)
    : index_(idx), cfg_(std::move(cfg)), backends_(std::move(backends)),
      lexicon_(std::move(lexicon)) {
    cfg_.validate();
    if (!backends_.backend) throw AgentError("agent requires an LLM backend");
    if (cfg_.router_mode == "model" && !backends_.router_model) {
        throw AgentError("router_mode=model requires a router model");
    }
}

void Agent::retrieve_for(const std::vector<reason::SubQuestion>& subqs, EvidenceBuffer& buffer,
                         int iteration, IterationRecord& record) {
    for (const auto& sq : subqs) {
        if (sq.tag != reason::SubQuestionTag::Retrieval) continue;  // computation steps do not retrieve
        RetrievalRecord rr;
        rr.sub_question_order = sq.order;
        rr.query = sq.text;
        rr.results = index::retrieve(sq.text, index_, cfg_.retrieval, buffer.passage_ids());
        for (const auto& res : rr.results) {
            const corpus::Passage* p = index_.find_passage(res.passage_id);
            if (!p) continue;
            buffer.add(*p, res.hybrid_score, iteration, cfg_.max_iterations, cfg_.beta);
        }
        record.retrievals.push_back(std::move(rr));
    }
}

namespace {

struct PhaseUsage {
    long calls = 0;
    long tokens = 0;
    long latency_ms = 0;
    double cost = 0.0;
};

PhaseUsage delta(const llm::UsageLedger::Snapshot& before,
                 const llm::UsageLedger::Snapshot& after) {
    PhaseUsage u;
    u.calls = after.total_calls - before.total_calls;
    u.tokens = after.total_tokens - before.total_tokens;
    u.latency_ms = after.total_latency_ms - before.total_latency_ms;
    u.cost = after.estimated_cost - before.estimated_cost;
    return u;
}

void apply_usage(IterationRecord& record, const PhaseUsage& u) {
    record.llm_calls += static_cast<int>(u.calls);
    record.tokens += u.tokens;
    record.latency_ms += u.latency_ms;
    record.cost += u.cost;
}

}  // namespace

TurnResult Agent::run_one(const std::string& question, const std::string& question_id,
                          EvidenceBuffer& buffer, const std::string& history) {
    // Session-local ledger: per-iteration usage deltas stay exact even when
    // other sessions share the backend. Merged into the global ledger at the
    // end of the run.
    auto session_ledger = std::make_shared<llm::UsageLedger>();
    llm::LlmClient client(backends_.backend, session_ledger, backends_.cost);
    reason::Reasoner reasoner(client, backends_.calibration);

    AgentTrace trace;
    trace.question = question;
    trace.question_id = question_id;

    auto finalize = [&](TurnResult& result) {
        const auto totals = session_ledger->snapshot();
        trace.total_llm_calls = static_cast<int>(totals.total_calls);
        trace.total_tokens = totals.total_tokens;
        trace.latency_ms = totals.total_latency_ms;
        trace.total_cost = totals.estimated_cost;
        if (backends_.ledger) backends_.ledger->merge(totals);
        result.trace = trace;
    };

    TurnResult result;

    auto snap_before_decompose = session_ledger->snapshot();
    std::vector<reason::SubQuestion> subqs = reasoner.decompose(question, history);

    // Routing is a per-question path decision made once, before iteration 1.
    const router::RouterFeatures features =
        router::extract_features(question, subqs, lexicon_);
    if (cfg_.router_mode == "off") {
        trace.route = {router::Route::Complex, 1.0};
    } else if (cfg_.router_mode == "model") {
        trace.route = router::route(features, *backends_.router_model);
    } else {
        trace.route = router::route(features, router::RouterModel{});
    }

    if (trace.route.route == router::Route::Simple) {
        // Single retrieval pass + direct PoT; no verification loop.
        IterationRecord record;
        record.k = 1;
        record.sub_questions = subqs;
        retrieve_for(subqs, buffer, 1, record);
        const auto evidence = buffer.texts();
        try {
            reason::PotResult pot = reasoner.pot(question, evidence, history);
            if (pot.outcome) {
                record.mode = "pot";
                record.outcome = *pot.outcome;
            } else {
                record.mode = "pot_fallback_cot";
                record.outcome = reasoner.cot(question, evidence, history);
            }
            trace.final_answer = record.outcome->answer;
            result.answer = record.outcome->answer;
        } catch (const std::exception& e) {
            record.error = e.what();
            trace.final_answer = answer::AnswerValue::from_text("error: " + record.error);
            result.answer = trace.final_answer;
        }
        apply_usage(record, delta(snap_before_decompose, session_ledger->snapshot()));
        trace.iterations.push_back(std::move(record));
        trace.termination = Termination::MaxIterations;
        finalize(result);
        return result;
    }

    std::optional<answer::AnswerValue> last_answer;
    auto phase_start = snap_before_decompose;  // decomposition cost lands in iteration 1
    for (int k = 1; k <= cfg_.max_iterations; ++k) {
        IterationRecord record;
        record.k = k;
        record.sub_questions = subqs;
        retrieve_for(subqs, buffer, k, record);
        const auto evidence = buffer.texts();

        const bool has_computation =
            std::any_of(subqs.begin(), subqs.end(), [](const auto& sq) {
                return sq.tag == reason::SubQuestionTag::Computation;
            });

        std::optional<reason::ReasoningOutcome> outcome;
        try {
            if (has_computation) {
                reason::PotResult pot = reasoner.pot(question, evidence, history);
                if (pot.outcome) {
                    record.mode = "pot";
                    outcome = *pot.outcome;
                } else {
                    record.mode = "pot_fallback_cot";
                    outcome = reasoner.cot(question, evidence, history);
                }
            } else {
                record.mode = "cot";
                outcome = reasoner.cot(question, evidence, history);
            }
        } catch (const std::exception& e) {
            // Total reasoning failure: record and continue with the next
            // iteration.
            record.error = e.what();
            apply_usage(record, delta(phase_start, session_ledger->snapshot()));
            phase_start = session_ledger->snapshot();
            trace.iterations.push_back(std::move(record));
            continue;
        }
        record.outcome = outcome;
        last_answer = outcome->answer;

        const verify::Verdict verdict =
            verify::verify_answer(question, *outcome, evidence, client, history);
        record.verdict = verdict;

        if (verdict.decision == verify::Decision::Accept) {
            apply_usage(record, delta(phase_start, session_ledger->snapshot()));
            trace.iterations.push_back(std::move(record));
            trace.termination = Termination::VerifierAccept;
            trace.final_answer = outcome->answer;
            result.answer = outcome->answer;
            finalize(result);
            return result;
        }
        if (outcome->confidence() > cfg_.confidence_threshold) {
            apply_usage(record, delta(phase_start, session_ledger->snapshot()));
            trace.iterations.push_back(std::move(record));
            trace.termination = Termination::Confidence;
            trace.final_answer = outcome->answer;
            result.answer = outcome->answer;
            finalize(result);
            return result;
        }
        subqs = verify::refine_queries(question, *outcome, verdict, evidence, client, subqs,
                                       history);
        apply_usage(record, delta(phase_start, session_ledger->snapshot()));
        phase_start = session_ledger->snapshot();
        trace.iterations.push_back(std::move(record));
    }

    trace.termination = Termination::MaxIterations;
    if (last_answer) {
        trace.final_answer = *last_answer;  // the final iteration's answer
    } else {
        trace.final_answer =
            answer::AnswerValue::from_text("error: all reasoning attempts failed");
    }
    result.answer = trace.final_answer;
    finalize(result);
    return result;
}

TurnResult Agent::run_question(const std::string& question, const std::string& question_id) {
    EvidenceBuffer buffer(cfg_.buffer_capacity);
    return run_one(question, question_id, buffer, "");
}

std::vector<TurnResult> Agent::run_conversation(const std::vector<std::string>& turns,
                                                const std::string& conversation_id) {
    if (turns.empty()) throw AgentError("run_conversation requires at least one turn");
    ConversationSession session(*this, conversation_id);
    std::vector<TurnResult> results;
    results.reserve(turns.size());
    for (const auto& q : turns) results.push_back(session.ask(q));
    return results;
}

ConversationSession::ConversationSession(Agent& agent, std::string conversation_id)
    : agent_(agent), conversation_id_(std::move(conversation_id)),
      buffer_(agent.cfg_.buffer_capacity) {}

void ConversationSession::reset() {
    buffer_ = EvidenceBuffer(agent_.cfg_.buffer_capacity);
    history_.clear();
    turn_ = 0;
}

TurnResult ConversationSession::ask(const std::string& question) {
    buffer_.prune_to_top(agent_.cfg_.turn_prune_size, agent_.cfg_.max_iterations,
                         agent_.cfg_.beta);
    const std::string turn_id = conversation_id_ + "#t" + std::to_string(turn_);
    TurnResult result;
    try {
        result = agent_.run_one(question, turn_id, buffer_, history_);
    } catch (const std::exception& e) {
        // Per-turn errors are isolated; later turns still run, with the
        // error marker visible in their history.
        result.answer = answer::AnswerValue::from_text(std::string("error: ") + e.what());
        result.trace.question = question;
        result.trace.question_id = turn_id;
        result.trace.final_answer = result.answer;
    }
    result.trace.conversation_id = conversation_id_;
    result.trace.turn_index = turn_;
    std::ostringstream line;
    line << "Q" << (turn_ + 1) << ": " << question << "\n"
         << "A" << (turn_ + 1) << ": " << answer::format_answer(result.answer) << "\n";
    history_ += line.str();
    ++turn_;
    return result;
}

}  // namespace finrag::agent
