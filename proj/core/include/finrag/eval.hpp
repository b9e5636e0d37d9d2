#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "finrag/agent.hpp"
#include "finrag/answer.hpp"
#include "finrag/corpus.hpp"
#include "finrag/program.hpp"

namespace finrag::eval {

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct QAExample {
    std::string id;
    std::string question;
    answer::AnswerValue gold_answer;
    std::optional<std::string> gold_program;  // "op(a, b), op(#0, c)" notation
    std::vector<std::string> gold_passage_ids;
    std::optional<std::string> conversation_id;
    std::optional<int> turn_index;
};

enum class DatasetFormat { FinQA, ConvFinQA, TatQA, Native };

DatasetFormat dataset_format_from_string(std::string_view s);

struct LoadedDataset {
    std::vector<QAExample> examples;
    std::vector<corpus::Document> documents;
    int skipped = 0;  // malformed records
};

/// Adapters map each release's fields (pre_text/post_text/table/qa and
/// analogues) onto QAExample + Document records; malformed records are
/// skipped and counted.
LoadedDataset load_dataset(const std::string& path, DatasetFormat format);

/// Numeric answers match within 1% relative tolerance (gold zero requires
/// |pred| <= 1e-4); booleans and text match after normalization; percent vs
/// plain values additionally reconcile across the x100 scale when kinds
/// differ.
bool exe_accuracy(const answer::AnswerValue& pred, const answer::AnswerValue& gold);

/// Canonical postfix operation sequence with numeric operand normalization
/// and commutative add/multiply argument ordering.
std::string canonicalize_program(const program::Program& p);
std::string canonicalize_gold_program(const std::string& gold);  // throws EvalError if unsupported

/// Program-accuracy op-sequence form of a parsed program (gold-notation
/// round-trip helper).
std::string program_to_op_sequence(const program::Program& p);

bool prog_accuracy(const program::Program& pred, const std::string& gold_program);

/// Token-level bag-overlap F1, case-folded; both empty -> 1.
double answer_f1(const std::string& pred, const std::string& gold);

struct RecallReport {
    std::map<int, double> recall_at_k;
    double mrr = 0.0;
    int n_queries = 0;  // queries with gold ids
};

RecallReport recall_metrics(const std::vector<std::vector<std::string>>& ranked_ids,
                            const std::vector<std::vector<std::string>>& gold_ids,
                            const std::vector<int>& ks);

struct SignificanceReport {
    std::pair<double, double> ci_a;
    std::pair<double, double> ci_b;
    double accuracy_a = 0.0;
    double accuracy_b = 0.0;
    double mcnemar_chi2 = 0.0;
    int discordant_a_only = 0;  // a correct, b incorrect
    int discordant_b_only = 0;
};

/// Seeded percentile bootstrap (reproducible bit-for-bit) plus McNemar's
/// chi^2 = (b-c)^2/(b+c) over discordant pairs (0 when b+c = 0).
SignificanceReport significance(const std::vector<bool>& correct_a,
                                const std::vector<bool>& correct_b, int n_boot = 10000,
                                unsigned seed = 42);

struct CostRecord {
    std::string label;
    double api_calls = 0.0;
    double latency_ms = 0.0;
    double cost = 0.0;
    std::optional<bool> correct;
};

struct CostRow {
    std::string label;
    int n = 0;
    double mean_api_calls = 0.0;
    double mean_latency_ms = 0.0;
    double mean_cost = 0.0;
    double accuracy = 0.0;  // over records with correctness
};

struct CostReport {
    std::vector<CostRow> rows;  // insertion order of first appearance

    const CostRow* find(const std::string& label) const;
};

CostReport cost_report(const std::vector<CostRecord>& records);

/// Builds cost records from serialized trace lines (the schema emitted by
/// agent::trace_to_json); correctness may be empty or aligned per trace.
std::vector<CostRecord> cost_records_from_traces(const std::vector<std::string>& trace_lines,
                                                 const std::string& label,
                                                 const std::vector<bool>& correctness = {});

/// 1 - mean_calls(on)/mean_calls(off).
double call_reduction(const CostReport& report, const std::string& label_on,
                      const std::string& label_off);

struct MetricReport {
    double exe_acc = 0.0;
    double prog_acc = 0.0;
    int prog_n = 0;  // examples with parseable gold programs
    double turn_acc = 0.0;
    double conversation_acc = 0.0;
    double f1 = 0.0;
    std::map<int, double> recall_at_k;
    double mrr = 0.0;
    double avg_api_calls = 0.0;
    double avg_latency_ms = 0.0;
    double est_cost = 0.0;
    int n = 0;
};

nlohmann::json metric_report_to_json(const MetricReport& r);
std::string metric_report_table(const MetricReport& r);

struct EvalRunConfig {
    agent::AgentConfig agent;
    std::vector<int> recall_ks{5, 10};
    int workers = 1;
    std::string label = "default";
};

struct EvalOutput {
    MetricReport report;
    std::vector<std::string> trace_lines;  // one JSON record per question, input order
    std::vector<bool> correctness;         // per example, input order
};

/// Runs every example through an agent session (grouping conversational
/// examples by conversation id), computes all metrics, and emits one trace
/// record per question. Deterministic for scripted backends and fixed seeds.
using BackendFactory = std::function<std::shared_ptr<llm::LlmBackend>()>;

EvalOutput run_evaluation(const LoadedDataset& dataset, const index::Index& idx,
                          const EvalRunConfig& cfg, const BackendFactory& make_backend,
                          const mining::Lexicon& lexicon,
                          std::shared_ptr<llm::UsageLedger> global_ledger = nullptr,
                          llm::CostModel cost = {},
                          std::optional<calibration::CalibrationModel> calibration = std::nullopt,
                          std::optional<router::RouterModel> router_model = std::nullopt);

}  // namespace finrag::eval
