#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

namespace finrag::answer {

enum class AnswerKind { Number, Percent, Boolean, Text };

/// Final answer of a question. Percent values are stored in percentage
/// points (5.19 means 5.19%).
struct AnswerValue {
    AnswerKind kind = AnswerKind::Text;
    double number = 0.0;        // Number/Percent
    bool boolean = false;       // Boolean
    std::string text;           // Text
    std::optional<std::string> unit;

    bool is_numeric() const { return kind == AnswerKind::Number || kind == AnswerKind::Percent; }

    static AnswerValue from_number(double v, std::optional<std::string> unit = std::nullopt);
    static AnswerValue from_percent(double v);
    static AnswerValue from_boolean(bool v);
    static AnswerValue from_text(std::string v);
};

std::string to_string(AnswerKind k);
AnswerKind answer_kind_from_string(std::string_view s);

/// Parses a surface answer string. Strips currency symbols, commas and "%";
/// million/billion (and M/B/k suffixes) multiply the value; yes/no/true/false
/// become booleans; anything else is text.
AnswerValue parse_answer_value(std::string_view raw);

/// Lenient scan for a plain numeric literal ("1,234.5", "$142M"); used for
/// extracting magnitudes from evidence text.
std::optional<double> parse_number(std::string_view raw);

std::string format_answer(const AnswerValue& a);

nlohmann::json answer_to_json(const AnswerValue& a);
AnswerValue answer_from_json(const nlohmann::json& j);

}  // namespace finrag::answer
