#include "finrag/verify.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "finrag/prompts.hpp"

namespace finrag::verify {

std::string to_string(Check c) {
    switch (c) {
        case Check::Sufficiency: return "sufficiency";
        case Check::Numeric: return "numeric";
        case Check::Cross: return "cross";
    }
    return "sufficiency";
}

Verdict Verdict::aggregate(bool sufficiency, bool numeric, bool cross,
                           std::map<std::string, std::string> explanations) {
    Verdict v;
    v.sufficiency = sufficiency;
    v.numeric = numeric;
    v.cross = cross;
    v.decision = (sufficiency && numeric && cross) ? Decision::Accept : Decision::Reject;
    if (!sufficiency) v.failure_categories.push_back(Check::Sufficiency);
    if (!numeric) v.failure_categories.push_back(Check::Numeric);
    if (!cross) v.failure_categories.push_back(Check::Cross);
    v.explanations = std::move(explanations);
    return v;
}

namespace {

bool is_expr_char(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == ',' || c == '$' ||
           c == '%' || c == '(' || c == ')' || c == '+' || c == '-' || c == '*' || c == '/' ||
           c == ' ' || c == '\t';
}

// Strip $ , % decorations so the program-language expression parser accepts it.
std::string sanitize_expression(std::string_view raw, bool* unsupported) {
    std::string out;
    for (char c : raw) {
        if (c == '$' || c == ',' || c == '%') continue;
        out += c;
    }
    // Reject empty or operator-free snippets: "5 = 5" is not an arithmetic claim.
    bool has_op = false;
    for (size_t i = 0; i < out.size(); ++i) {
        const char c = out[i];
        if (c == '+' || c == '*' || c == '/') has_op = true;
        if (c == '-' && i > 0) {
            // A '-' after a digit or ')' is a binary operator.
            for (size_t k = i; k-- > 0;) {
                if (out[k] == ' ') continue;
                if (std::isdigit(static_cast<unsigned char>(out[k])) || out[k] == ')') {
                    has_op = true;
                }
                break;
            }
        }
    }
    *unsupported = !has_op;
    return out;
}

struct ParsedClaim {
    double value = 0.0;
    bool percent = false;
    bool ok = false;
    size_t consumed = 0;
};

ParsedClaim parse_claim_number(std::string_view s) {
    ParsedClaim out;
    size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    size_t start = i;
    if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
    if (i < s.size() && s[i] == '$') ++i;
    bool digits = false, dot = false;
    while (i < s.size()) {
        const char c = s[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            digits = true;
        } else if (c == ',') {
            // separator
        } else if (c == '.' && !dot) {
            dot = true;
        } else {
            break;
        }
        ++i;
    }
    if (!digits) return out;
    std::string cleaned;
    for (size_t k = start; k < i; ++k) {
        if (s[k] != ',' && s[k] != '$' && s[k] != '+') cleaned += s[k];
    }
    try {
        out.value = std::stod(cleaned);
    } catch (const std::exception&) {
        return out;
    }
    if (i < s.size() && s[i] == '%') {
        out.percent = true;
        ++i;
    }
    out.ok = true;
    out.consumed = i;
    return out;
}

// Relative comparison mirroring the execution-accuracy rule.
bool matches_within_1pct(double evaluated, double claimed) {
    if (claimed == 0.0) return std::fabs(evaluated) <= 1e-4;
    return std::fabs(evaluated - claimed) / std::max(std::fabs(claimed), 1e-12) <= 0.01;
}

}  // namespace

std::vector<ArithmeticClaim> extract_arithmetic_claims(const std::string& chain) {
    std::vector<ArithmeticClaim> claims;
    for (size_t eq = 0; eq < chain.size(); ++eq) {
        if (chain[eq] != '=') continue;
        if (eq + 1 < chain.size() && chain[eq + 1] == '=') {  // '==' is not a claim
            ++eq;
            continue;
        }
        // Walk left over expression characters, staying within the line.
        size_t begin = eq;
        while (begin > 0) {
            const char c = chain[begin - 1];
            if (c == '\n' || !is_expr_char(c)) break;
            --begin;
        }
        std::string_view lhs(chain.data() + begin, eq - begin);
        while (!lhs.empty() && (lhs.front() == ' ' || lhs.front() == '\t')) lhs.remove_prefix(1);
        while (!lhs.empty() && (lhs.back() == ' ' || lhs.back() == '\t')) lhs.remove_suffix(1);
        if (lhs.empty()) continue;

        ParsedClaim rhs = parse_claim_number(std::string_view(chain).substr(eq + 1));
        if (!rhs.ok) continue;

        bool trivial = false;
        const std::string expr_text = sanitize_expression(lhs, &trivial);
        if (trivial) continue;
        double evaluated = 0.0;
        try {
            auto expr = program::parse_arithmetic_expression(expr_text);
            evaluated = program::evaluate_expression(expr);
        } catch (const program::ProgramError&) {
            continue;  // not a parseable arithmetic expression
        }
        ArithmeticClaim claim;
        claim.expression = std::string(lhs);
        claim.evaluated = evaluated;
        claim.claimed = rhs.value;
        claim.claimed_is_percent = rhs.percent;
        if (rhs.percent) {
            // A percent claim may state the raw ratio or the x100 form.
            claim.holds = matches_within_1pct(evaluated, rhs.value) ||
                          matches_within_1pct(evaluated * 100.0, rhs.value);
        } else {
            claim.holds = matches_within_1pct(evaluated, rhs.value);
        }
        claims.push_back(std::move(claim));
    }
    return claims;
}

NumericCheckDetail check_numeric_detailed(const reason::ReasoningOutcome& outcome) {
    NumericCheckDetail detail;
    if (outcome.mode == reason::ReasoningMode::Pot) {
        if (!outcome.execution_value) {
            detail.passed = false;
            detail.explanation = "program outcome has no recorded execution value";
            return detail;
        }
        try {
            const program::Program prog = program::parse_program(outcome.chain_or_program);
            const double value = program::execute_program(prog);
            const double expected = *outcome.execution_value;
            const double denom = std::max(std::fabs(expected), 1e-12);
            if (std::fabs(value - expected) / denom <= 1e-9) {
                detail.passed = true;
            } else {
                detail.passed = false;
                std::ostringstream os;
                os << "program re-execution produced " << value << ", recorded " << expected;
                detail.explanation = os.str();
            }
        } catch (const program::ProgramError& e) {
            detail.passed = false;
            detail.explanation = std::string("program re-execution failed: ") + e.what();
        }
        return detail;
    }
    const auto claims = extract_arithmetic_claims(outcome.chain_or_program);
    for (const auto& c : claims) {
        if (!c.holds) {
            detail.passed = false;
            std::ostringstream os;
            os << "arithmetic claim \"" << c.expression << " = " << c.claimed
               << (c.claimed_is_percent ? "%" : "") << "\" re-evaluates to ";
            if (c.claimed_is_percent) {
                // Report in the claim's unit: the x100 form closest to it.
                const double as_pct = std::fabs(c.evaluated * 100.0 - c.claimed) <
                                              std::fabs(c.evaluated - c.claimed)
                                          ? c.evaluated * 100.0
                                          : c.evaluated;
                os << as_pct << "%";
            } else {
                os << c.evaluated;
            }
            detail.explanation = os.str();
            return detail;
        }
    }
    detail.passed = true;  // vacuous when no claims are extractable
    return detail;
}

bool check_numeric(const reason::ReasoningOutcome& outcome) {
    return check_numeric_detailed(outcome).passed;
}

namespace {

struct LlmCheckResult {
    bool passed = false;
    std::string explanation;
};

LlmCheckResult parse_pass_fail(const std::string& reply) {
    LlmCheckResult out;
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
        std::string_view v(line);
        while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
        if (v.rfind("PASS", 0) == 0) {
            out.passed = true;
            out.explanation = "";
            return out;
        }
        if (v.rfind("FAIL", 0) == 0) {
            out.passed = false;
            auto colon = v.find(':');
            out.explanation = colon == std::string_view::npos
                                  ? "unspecified failure"
                                  : std::string(v.substr(colon + 1));
            while (!out.explanation.empty() && out.explanation.front() == ' ') {
                out.explanation.erase(out.explanation.begin());
            }
            return out;
        }
    }
    out.passed = false;
    out.explanation = "unparseable verifier reply";
    return out;
}

LlmCheckResult run_llm_check(llm::CallTag tag, const prompts::PromptSlots& slots,
                             llm::LlmClient& client) {
    try {
        llm::LlmRequest req;
        req.prompt = prompts::render_prompt(tag, slots);
        req.tag = tag;
        const llm::LlmResponse resp = client.complete(req);
        return parse_pass_fail(resp.text);
    } catch (const std::exception&) {
        // Conservative: a missing check must trigger refinement, not
        // silent acceptance.
        return {false, "verifier unavailable"};
    }
}

}  // namespace

Verdict verify_answer(const std::string& question, const reason::ReasoningOutcome& outcome,
                      const std::vector<std::string>& evidence, llm::LlmClient& client,
                      const std::string& history) {
    const std::string answer_text = answer::format_answer(outcome.answer);

    prompts::PromptSlots suff_slots;
    suff_slots.text["question"] = question;
    suff_slots.text["answer"] = answer_text;
    if (!history.empty()) suff_slots.text["history"] = history;
    suff_slots.evidence = evidence;
    const LlmCheckResult suff = run_llm_check(llm::CallTag::VerifySuff, suff_slots, client);

    const NumericCheckDetail numeric = check_numeric_detailed(outcome);

    prompts::PromptSlots cross_slots;
    cross_slots.text["question"] = question;
    cross_slots.text["answer"] = answer_text;
    if (!history.empty()) cross_slots.text["history"] = history;
    cross_slots.evidence = evidence;
    const LlmCheckResult cross = run_llm_check(llm::CallTag::VerifyCross, cross_slots, client);

    std::map<std::string, std::string> explanations;
    explanations["sufficiency"] = suff.passed ? "PASS" : suff.explanation;
    explanations["numeric"] = numeric.passed ? "PASS" : numeric.explanation;
    explanations["cross"] = cross.passed ? "PASS" : cross.explanation;
    return Verdict::aggregate(suff.passed, numeric.passed, cross.passed, std::move(explanations));
}

std::vector<reason::SubQuestion> refine_queries(
    const std::string& question, const reason::ReasoningOutcome& outcome, const Verdict& verdict,
    const std::vector<std::string>& evidence, llm::LlmClient& client,
    const std::vector<reason::SubQuestion>& current_subquestions, const std::string& history) {
    std::ostringstream failures;
    for (const auto& check : verdict.failure_categories) {
        const std::string name = to_string(check);
        failures << "- " << name << " check failed";
        auto it = verdict.explanations.find(name);
        if (it != verdict.explanations.end() && !it->second.empty() && it->second != "PASS") {
            failures << ": " << it->second;
        }
        failures << "\n";
    }

    std::string reply_text;
    try {
        prompts::PromptSlots slots;
        slots.text["question"] = question;
        slots.text["answer"] = answer::format_answer(outcome.answer);
        slots.text["failures"] = failures.str();
        if (!history.empty()) slots.text["history"] = history;
        slots.evidence = evidence;
        llm::LlmRequest req;
        req.prompt = prompts::render_prompt(llm::CallTag::Refine, slots);
        req.tag = llm::CallTag::Refine;
        reply_text = client.complete(req).text;
    } catch (const std::exception&) {
        reply_text.clear();
    }

    // Parse like decompose output, but detect the fallback case ourselves so
    // the qualifier contract applies.
    if (!reply_text.empty()) {
        auto parsed = reason::parse_decomposition(reply_text, "");
        // parse_decomposition falls back to a single sub-question equal to the
        // question (here: empty) when nothing parsed; treat that as a miss.
        if (!(parsed.size() == 1 && parsed[0].text.empty())) {
            return parsed;
        }
    }

    // Fallback: requeue the current sub-questions with the failure
    // explanation appended as a qualifier phrase.
    std::string qualifier;
    if (!verdict.failure_categories.empty()) {
        const std::string name = to_string(verdict.failure_categories.front());
        auto it = verdict.explanations.find(name);
        qualifier = it != verdict.explanations.end() && !it->second.empty()
                        ? it->second
                        : name + " check failed";
    } else {
        qualifier = "verification failed";
    }
    std::vector<reason::SubQuestion> out;
    if (current_subquestions.empty()) {
        reason::SubQuestion sq;
        sq.text = question + " (" + qualifier + ")";
        sq.tag = reason::SubQuestionTag::Retrieval;
        sq.pattern = reason::Pattern::Lookup;
        sq.order = 0;
        out.push_back(std::move(sq));
        return out;
    }
    out = current_subquestions;
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i].tag == reason::SubQuestionTag::Retrieval) {
            out[i].text += " (" + qualifier + ")";
        }
        out[i].order = static_cast<int>(i);
    }
    return out;
}

}  // namespace finrag::verify
