#pragma once

#include <optional>
#include <string>
#include <vector>

#include "finrag/answer.hpp"
#include "finrag/calibration.hpp"
#include "finrag/llm.hpp"
#include "finrag/program.hpp"

namespace finrag::reason {

class ReasonError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SubQuestionTag { Retrieval, Computation };

enum class Pattern {
    TemporalComparison,
    Ratio,
    MultiEntityAggregation,
    ConditionalFiltering,
    DerivedMetric,
    Lookup,
};

std::string to_string(SubQuestionTag t);
std::string to_string(Pattern p);
std::optional<Pattern> pattern_from_string(std::string_view s);

struct SubQuestion {
    std::string text;
    SubQuestionTag tag = SubQuestionTag::Retrieval;
    Pattern pattern = Pattern::Lookup;
    int order = 0;
};

enum class ReasoningMode { Cot, Pot };

struct ReasoningOutcome {
    answer::AnswerValue answer;
    double raw_confidence = 0.0;
    double calibrated_confidence = 0.0;
    ReasoningMode mode = ReasoningMode::Cot;
    std::string chain_or_program;
    std::optional<double> execution_value;  // PoT only
    int repairs_used = 0;                   // PoT only

    double confidence() const { return calibrated_confidence; }
};

/// Parses the decomposer's "R:"/"C:" line protocol. Unparseable output falls
/// back to a single retrieval sub-question equal to the question.
std::vector<SubQuestion> parse_decomposition(const std::string& llm_output,
                                             const std::string& question);

/// Parses the final "ANSWER: <value> | CONFIDENCE: <c>" line of a CoT reply.
/// A missing or malformed confidence reads as 0.0; the answer is still
/// parsed from whatever follows "ANSWER:".
struct ParsedCot {
    answer::AnswerValue answer;
    double raw_confidence = 0.0;
};
ParsedCot parse_cot_reply(const std::string& reply);

/// Strips code fences / prose and returns the program text of a PoT reply.
std::string extract_program_text(const std::string& reply);

struct PotResult {
    std::optional<ReasoningOutcome> outcome;  // nullopt: all attempts failed, fall back to CoT
    int repairs_used = 0;
    std::vector<std::string> attempt_errors;
};

/// Dual-mode reasoner: CoT with confidence parsing, and the PoT pipeline
/// (generate -> parse -> static check -> execute -> runtime verify, with at
/// most two LLM repairs). Confidences are calibrated when a model is loaded.
class Reasoner {
public:
    explicit Reasoner(llm::LlmClient& client,
                      std::optional<calibration::CalibrationModel> calibration = std::nullopt);

    std::vector<SubQuestion> decompose(const std::string& question,
                                       const std::string& history = "");

    ReasoningOutcome cot(const std::string& question, const std::vector<std::string>& evidence,
                         const std::string& history = "");

    /// Raw confidence schedule for PoT: 0.9 clean, 0.7 after one repair,
    /// 0.5 after two.
    PotResult pot(const std::string& question, const std::vector<std::string>& evidence,
                  const std::string& history = "");

    const std::optional<calibration::CalibrationModel>& calibration() const {
        return calibration_;
    }
    double calibrate(double raw) const;

private:
    llm::LlmClient& client_;
    std::optional<calibration::CalibrationModel> calibration_;
};

}  // namespace finrag::reason
