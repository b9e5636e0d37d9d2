#include "finrag/reason.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "finrag/prompts.hpp"

namespace finrag::reason {

std::string to_string(SubQuestionTag t) {
    return t == SubQuestionTag::Retrieval ? "retrieval" : "computation";
}

std::string to_string(Pattern p) {
    switch (p) {
        case Pattern::TemporalComparison: return "temporal_comparison";
        case Pattern::Ratio: return "ratio";
        case Pattern::MultiEntityAggregation: return "multi_entity_aggregation";
        case Pattern::ConditionalFiltering: return "conditional_filtering";
        case Pattern::DerivedMetric: return "derived_metric";
        case Pattern::Lookup: return "lookup";
    }
    return "lookup";
}

std::optional<Pattern> pattern_from_string(std::string_view s) {
    if (s == "temporal_comparison") return Pattern::TemporalComparison;
    if (s == "ratio") return Pattern::Ratio;
    if (s == "multi_entity_aggregation") return Pattern::MultiEntityAggregation;
    if (s == "conditional_filtering") return Pattern::ConditionalFiltering;
    if (s == "derived_metric") return Pattern::DerivedMetric;
    if (s == "lookup") return Pattern::Lookup;
    return std::nullopt;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

std::vector<SubQuestion> parse_decomposition(const std::string& llm_output,
                                             const std::string& question) {
    static const std::regex line_re(
        R"(^\s*([RC])\s*:\s*(.*?)\s*(?:\[\s*([a-z_]+)\s*\])?\s*$)",
        std::regex::ECMAScript | std::regex::icase);

    std::vector<SubQuestion> out;
    std::istringstream in(llm_output);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) continue;
        const std::string body = m[2].str();
        if (body.empty()) continue;
        SubQuestion sq;
        sq.text = body;
        sq.tag = (m[1].str() == "C" || m[1].str() == "c") ? SubQuestionTag::Computation
                                                          : SubQuestionTag::Retrieval;
        sq.pattern = Pattern::Lookup;
        if (m[3].matched) {
            std::string label = m[3].str();
            std::transform(label.begin(), label.end(), label.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (auto p = pattern_from_string(label)) sq.pattern = *p;
        }
        sq.order = static_cast<int>(out.size());
        out.push_back(std::move(sq));
    }
    if (out.empty()) {
        SubQuestion fallback;
        fallback.text = question;
        fallback.tag = SubQuestionTag::Retrieval;
        fallback.pattern = Pattern::Lookup;
        fallback.order = 0;
        out.push_back(std::move(fallback));
    }
    return out;
}

ParsedCot parse_cot_reply(const std::string& reply) {
    ParsedCot out;
    // Last line of the form "ANSWER: ... | CONFIDENCE: c"; tolerate a
    // missing confidence half.
    std::string answer_part;
    std::string conf_part;
    std::istringstream in(reply);
    std::string line;
    bool found = false;
    while (std::getline(in, line)) {
        auto pos = line.find("ANSWER:");
        if (pos == std::string::npos) continue;
        found = true;
        std::string rest = line.substr(pos + 7);
        auto conf_pos = rest.find("CONFIDENCE:");
        if (conf_pos != std::string::npos) {
            conf_part = rest.substr(conf_pos + 11);
            rest = rest.substr(0, conf_pos);
        } else {
            conf_part.clear();
        }
        // Trim a trailing '|' separator off the answer half.
        auto bar = rest.find('|');
        if (bar != std::string::npos) rest = rest.substr(0, bar);
        answer_part = std::string(trim(rest));
    }
    if (!found) {
        out.answer = answer::AnswerValue::from_text(std::string(trim(reply)));
        out.raw_confidence = 0.0;
        return out;
    }
    out.answer = answer::parse_answer_value(answer_part);
    out.raw_confidence = 0.0;
    if (!conf_part.empty()) {
        try {
            const double c = std::stod(std::string(trim(conf_part)));
            if (c >= 0.0 && c <= 1.0) out.raw_confidence = c;
        } catch (const std::exception&) {
            out.raw_confidence = 0.0;
        }
    }
    return out;
}

std::string extract_program_text(const std::string& reply) {
    // Prefer fenced blocks when present.
    auto open = reply.find("```");
    if (open != std::string::npos) {
        auto nl = reply.find('\n', open);
        if (nl != std::string::npos) {
            auto close = reply.find("```", nl);
            if (close != std::string::npos) {
                return reply.substr(nl + 1, close - nl - 1);
            }
        }
    }
    return reply;
}

Reasoner::Reasoner(llm::LlmClient& client,
                   std::optional<calibration::CalibrationModel> calibration)
    : client_(client), calibration_(std::move(calibration)) {}

double Reasoner::calibrate(double raw) const {
    if (!calibration_) return raw;
    return calibration::apply_calibration(*calibration_, raw);
}

std::vector<SubQuestion> Reasoner::decompose(const std::string& question,
                                             const std::string& history) {
    prompts::PromptSlots slots;
    slots.text["question"] = question;
    if (!history.empty()) slots.text["history"] = history;
    llm::LlmRequest req;
    req.prompt = prompts::render_prompt(llm::CallTag::Decompose, slots);
    req.tag = llm::CallTag::Decompose;
    const llm::LlmResponse resp = client_.complete(req);
    auto subqs = parse_decomposition(resp.text, question);
    return subqs;
}

ReasoningOutcome Reasoner::cot(const std::string& question,
                               const std::vector<std::string>& evidence,
                               const std::string& history) {
    prompts::PromptSlots slots;
    slots.text["question"] = question;
    if (!history.empty()) slots.text["history"] = history;
    slots.evidence = evidence;
    llm::LlmRequest req;
    req.prompt = prompts::render_prompt(llm::CallTag::Cot, slots);
    req.tag = llm::CallTag::Cot;
    const llm::LlmResponse resp = client_.complete(req);

    const ParsedCot parsed = parse_cot_reply(resp.text);
    ReasoningOutcome out;
    out.answer = parsed.answer;
    out.raw_confidence = parsed.raw_confidence;
    out.calibrated_confidence = calibrate(parsed.raw_confidence);
    out.mode = ReasoningMode::Cot;
    out.chain_or_program = resp.text;
    return out;
}

PotResult Reasoner::pot(const std::string& question, const std::vector<std::string>& evidence,
                        const std::string& history) {
    PotResult result;
    const double bound = program::range_bound_from_evidence(evidence);

    std::string program_text;
    for (int attempt = 0; attempt <= 2; ++attempt) {
        prompts::PromptSlots slots;
        slots.text["question"] = question;
        if (!history.empty()) slots.text["history"] = history;
        slots.evidence = evidence;
        llm::LlmRequest req;
        if (attempt == 0) {
            req.prompt = prompts::render_prompt(llm::CallTag::Pot, slots);
            req.tag = llm::CallTag::Pot;
        } else {
            slots.text["program"] = program_text;
            slots.text["error"] = result.attempt_errors.back();
            req.prompt = prompts::render_prompt(llm::CallTag::Repair, slots);
            req.tag = llm::CallTag::Repair;
        }
        const llm::LlmResponse resp = client_.complete(req);
        program_text = extract_program_text(resp.text);

        try {
            const program::Program prog = program::parse_program(program_text);
            const auto violations = program::static_check(prog);
            if (!violations.empty()) {
                std::ostringstream os;
                os << "static check failed:";
                for (const auto& v : violations) {
                    os << " [" << program::to_string(v.kind) << "] " << v.message << ";";
                }
                throw ReasonError(os.str());
            }
            const double value = program::execute_program(prog);
            program::verify_runtime_value(value, bound);

            ReasoningOutcome out;
            out.answer = answer::AnswerValue::from_number(value);
            out.mode = ReasoningMode::Pot;
            out.chain_or_program = program_text;
            out.execution_value = value;
            out.repairs_used = attempt;
            out.raw_confidence = attempt == 0 ? 0.9 : (attempt == 1 ? 0.7 : 0.5);
            out.calibrated_confidence = calibrate(out.raw_confidence);
            result.outcome = std::move(out);
            result.repairs_used = attempt;
            return result;
        } catch (const program::ProgramError& e) {
            result.attempt_errors.emplace_back(e.what());
        } catch (const ReasonError& e) {
            result.attempt_errors.emplace_back(e.what());
        }
        result.repairs_used = attempt;
    }
    return result;  // outcome empty: caller falls back to CoT
}

}  // namespace finrag::reason
