#include "finrag/prompts.hpp"

#include <sstream>

namespace finrag::prompts {

namespace {

const std::string& require_slot(const PromptSlots& slots, const std::string& name) {
    auto it = slots.text.find(name);
    if (it == slots.text.end()) {
        throw PromptError("missing slot: " + name);
    }
    return it->second;
}

std::string optional_slot(const PromptSlots& slots, const std::string& name) {
    auto it = slots.text.find(name);
    return it == slots.text.end() ? std::string() : it->second;
}

void emit_evidence(std::ostringstream& os, const PromptSlots& slots) {
    os << "## Evidence\n";
    if (slots.evidence.empty()) {
        os << "(no evidence retrieved)\n";
    } else {
        for (size_t i = 0; i < slots.evidence.size(); ++i) {
            os << "[" << (i + 1) << "] " << slots.evidence[i] << "\n";
        }
    }
    os << "\n";
}

void emit_history(std::ostringstream& os, const PromptSlots& slots) {
    const std::string history = optional_slot(slots, "history");
    if (!history.empty()) {
        os << "## Conversation History\n" << history << "\n\n";
    }
}

void emit_question(std::ostringstream& os, const PromptSlots& slots) {
    os << "## Question\n" << require_slot(slots, "question") << "\n\n";
}

const char* kPatternList =
    "temporal_comparison, ratio, multi_entity_aggregation, conditional_filtering, "
    "derived_metric, lookup";

std::string render_decompose(const PromptSlots& slots) {
    std::ostringstream os;
    os << "## System Role\n"
          "You are a financial analyst who plans how to answer questions over corporate "
          "filings by breaking them into minimal retrieval and computation steps.\n\n";
    emit_evidence(os, slots);
    emit_history(os, slots);
    emit_question(os, slots);
    os << "## Instructions\n"
          "1. Identify every data point that must be retrieved from the filings.\n"
          "2. Identify the computation steps, if any, that combine those data points.\n"
          "3. Handle common financial shapes: split comparisons by time period, separate "
          "ratio numerators and denominators, retrieve each entity before aggregating, "
          "apply conditions before computing, and expand derived metrics into components.\n"
          "4. Resolve pronouns and references using the conversation history when present.\n"
          "5. Label each step with the decomposition pattern that applies ("
       << kPatternList
       << ").\n\n"
          "## Output Format\n"
          "One step per line, nothing else. Prefix retrieval steps with \"R:\" and "
          "computation steps with \"C:\"; end each line with the pattern label in square "
          "brackets. Example:\n"
          "R: total revenue in 2019 [temporal_comparison]\n"
          "R: total revenue in 2020 [temporal_comparison]\n"
          "C: percentage change between the two values [temporal_comparison]\n";
    return os.str();
}

std::string render_cot(const PromptSlots& slots) {
    std::ostringstream os;
    os << "## System Role\n"
          "You are a meticulous financial analyst answering questions from retrieved "
          "filing excerpts.\n\n";
    emit_evidence(os, slots);
    emit_history(os, slots);
    emit_question(os, slots);
    os << "## Instructions\n"
          "1. Identify the relevant numerical values in the evidence.\n"
          "2. Map each value to its financial concept (revenue, cost, margin, ...).\n"
          "3. Formulate the required computation as an explicit mathematical expression. "
          "Useful templates: percentage change (new - old) / old * 100; ratio "
          "numerator / denominator; weighted average sum(w*x) / sum(w); compound growth "
          "(final / initial) ** (1/n) - 1.\n"
          "4. Execute the computation step by step, writing each step as expression = value.\n"
          "5. State the final answer with appropriate units and precision.\n\n"
          "## Output Format\n"
          "Reason step by step, then end with exactly one line:\n"
          "ANSWER: <value> | CONFIDENCE: <number between 0 and 1>\n";
    return os.str();
}

void emit_program_rules(std::ostringstream& os) {
    os << "1. Identify the numeric inputs you need from the evidence.\n"
          "2. Write a straight-line arithmetic program, one assignment per line "
          "(tuple assignment like a, b = 1, 2 is allowed; # starts a comment).\n"
          "3. Allowed expressions: number literals, previously assigned variables, "
          "parentheses, the operators + - * / **, and calls to round, abs, min, max.\n"
          "4. No imports, loops, conditionals, strings, or any other function calls; "
          "every variable must be assigned before use.\n"
          "5. The last line must assign the final value to a variable named result.\n";
}

std::string render_pot(const PromptSlots& slots) {
    std::ostringstream os;
    os << "## System Role\n"
          "You are a financial analyst who expresses numerical answers as small "
          "executable arithmetic programs.\n\n";
    emit_evidence(os, slots);
    emit_history(os, slots);
    emit_question(os, slots);
    os << "## Instructions\n";
    emit_program_rules(os);
    os << "\n## Output Format\n"
          "Reply with the program only, no prose or code fences. The final value must be "
          "assigned to a result variable named result on the last line.\n";
    return os.str();
}

std::string render_repair(const PromptSlots& slots) {
    std::ostringstream os;
    os << "## System Role\n"
          "You are a financial analyst fixing a small arithmetic program that failed.\n\n";
    emit_evidence(os, slots);
    emit_question(os, slots);
    os << "## Previous Program\n"
       << require_slot(slots, "program")
       << "\n\n## Execution Error\n"
       << require_slot(slots, "error") << "\n\n";
    os << "## Instructions\n";
    emit_program_rules(os);
    os << "\n## Output Format\n"
          "Reply with the corrected program only. The final value must be assigned to a "
          "result variable named result on the last line.\n";
    return os.str();
}

void emit_checklist(std::ostringstream& os) {
    os << "1. The verification checklist has three criteria: (1) evidence sufficiency, "
          "(2) numerical consistency, (3) cross-evidence validation.\n";
}

std::string render_verify_suff(const PromptSlots& slots) {
    std::ostringstream os;
    os << "## System Role\n"
          "You are a financial auditor checking whether an answer is adequately "
          "supported by the retrieved evidence.\n\n";
    emit_evidence(os, slots);
    emit_history(os, slots);
    emit_question(os, slots);
    os << "## Candidate Answer\n" << require_slot(slots, "answer") << "\n\n";
    os << "## Instructions\n";
    emit_checklist(os);
    os << "2. Your task is criterion (1), evidence sufficiency: decide whether the "
          "evidence contains every data point needed to answer the question.\n"
          "3. If a required value, period, entity or metric is missing from the "
          "evidence, the check fails; name what is missing.\n\n"
          "## Output Format\n"
          "Reply with exactly one line: PASS or FAIL: <reason>\n";
    return os.str();
}

std::string render_verify_cross(const PromptSlots& slots) {
    std::ostringstream os;
    os << "## System Role\n"
          "You are a financial auditor checking an answer for contradictions across "
          "evidence passages.\n\n";
    emit_evidence(os, slots);
    emit_history(os, slots);
    os << "## Question\n" << optional_slot(slots, "question") << "\n\n";
    os << "## Candidate Answer\n" << require_slot(slots, "answer") << "\n\n";
    os << "## Instructions\n";
    emit_checklist(os);
    os << "2. Your task is criterion (3), cross-evidence validation: decide whether the "
          "answer is consistent across the evidence passages.\n"
          "3. Flag values drawn from mismatched contexts (different statements, periods, "
          "entities or aggregation levels) and any contradictions between passages.\n\n"
          "## Output Format\n"
          "Reply with exactly one line: PASS or FAIL: <reason>\n";
    return os.str();
}

std::string render_refine(const PromptSlots& slots) {
    std::ostringstream os;
    os << "## System Role\n"
          "You are a financial analyst revising a retrieval plan after verification "
          "rejected the current answer.\n\n";
    emit_evidence(os, slots);
    emit_history(os, slots);
    emit_question(os, slots);
    os << "## Rejected Answer\n" << require_slot(slots, "answer") << "\n\n";
    os << "## Verification Feedback\n" << require_slot(slots, "failures") << "\n\n";
    os << "## Instructions\n"
          "1. Generate refined sub-questions that address the verification feedback.\n"
          "2. If evidence sufficiency failed, put retrieval steps for the missing data "
          "points first.\n"
          "3. If cross-evidence validation failed, qualify the retrieval steps with the "
          "exact source context (statement, period, entity) that resolves the conflict.\n"
          "4. Label each step with its decomposition pattern ("
       << kPatternList
       << ").\n\n"
          "## Output Format\n"
          "One step per line: \"R:\" or \"C:\" prefix, pattern label in square brackets, "
          "exactly as in the decomposition format.\n";
    return os.str();
}

}  // namespace

std::string render_prompt(llm::CallTag template_id, const PromptSlots& slots) {
    switch (template_id) {
        case llm::CallTag::Decompose: return render_decompose(slots);
        case llm::CallTag::Cot: return render_cot(slots);
        case llm::CallTag::Pot: return render_pot(slots);
        case llm::CallTag::Repair: return render_repair(slots);
        case llm::CallTag::VerifySuff: return render_verify_suff(slots);
        case llm::CallTag::VerifyCross: return render_verify_cross(slots);
        case llm::CallTag::Refine: return render_refine(slots);
    }
    throw PromptError("unknown template id");
}

}  // namespace finrag::prompts
