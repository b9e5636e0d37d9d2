#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "finrag/llm.hpp"

namespace finrag::prompts {

class PromptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dynamic content for a template. Evidence passages are rendered as a
/// numbered [1..n] block; scalar slots are looked up by name.
struct PromptSlots {
    std::map<std::string, std::string> text;  // question, answer, history, program, error, failures
    std::vector<std::string> evidence;
};

/// Renders the structured prompt for a reasoning-module call. Every template
/// emits, in order: System Role, Evidence, Question, numbered Instructions,
/// and Output Format sections. Missing required slots raise PromptError
/// naming the slot.
std::string render_prompt(llm::CallTag template_id, const PromptSlots& slots);

}  // namespace finrag::prompts
