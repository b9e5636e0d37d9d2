#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "finrag/llm.hpp"
#include "finrag/reason.hpp"

namespace finrag::verify {

enum class Check { Sufficiency, Numeric, Cross };

std::string to_string(Check c);

enum class Decision { Accept, Reject };

/// Three-check verification outcome. ACCEPT iff all three checks pass;
/// failure_categories is exactly the set of failed checks.
struct Verdict {
    bool sufficiency = false;
    bool numeric = false;
    bool cross = false;
    Decision decision = Decision::Reject;
    std::vector<Check> failure_categories;
    std::map<std::string, std::string> explanations;  // keyed by check name

    static Verdict aggregate(bool sufficiency, bool numeric, bool cross,
                             std::map<std::string, std::string> explanations = {});
};

/// One "expression = claim" arithmetic claim extracted from a CoT chain.
struct ArithmeticClaim {
    std::string expression;
    double evaluated = 0.0;
    double claimed = 0.0;
    bool claimed_is_percent = false;
    bool holds = false;
};

/// Extracts claims of the form "<arithmetic expression> = <number[%]>" from a
/// reasoning chain and re-evaluates each to 1% relative tolerance.
std::vector<ArithmeticClaim> extract_arithmetic_claims(const std::string& chain);

/// Numerical consistency check. PoT outcomes re-execute the stored program
/// and compare to the recorded execution value (1e-9 relative); CoT outcomes
/// must have all extractable arithmetic claims hold (vacuously true when
/// none are extractable). Deterministic and side-effect free.
bool check_numeric(const reason::ReasoningOutcome& outcome);

struct NumericCheckDetail {
    bool passed = true;
    std::string explanation;
};
NumericCheckDetail check_numeric_detailed(const reason::ReasoningOutcome& outcome);

/// Runs the sufficiency and cross-evidence LLM checks plus the local numeric
/// check and aggregates the verdict. An LLM failure on a check makes that
/// check fail with explanation "verifier unavailable".
Verdict verify_answer(const std::string& question, const reason::ReasoningOutcome& outcome,
                      const std::vector<std::string>& evidence, llm::LlmClient& client,
                      const std::string& history = "");

/// Generates refined sub-questions from the verification feedback. On an
/// unparseable reply, falls back to the current sub-questions with the
/// failure explanation appended as a qualifier; never returns an empty list.
std::vector<reason::SubQuestion> refine_queries(
    const std::string& question, const reason::ReasoningOutcome& outcome, const Verdict& verdict,
    const std::vector<std::string>& evidence, llm::LlmClient& client,
    const std::vector<reason::SubQuestion>& current_subquestions,
    const std::string& history = "");

}  // namespace finrag::verify
