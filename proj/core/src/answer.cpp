#include "finrag/answer.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace finrag::answer {

namespace {

std::string fold(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

AnswerValue AnswerValue::from_number(double v, std::optional<std::string> unit) {
    AnswerValue a;
    a.kind = AnswerKind::Number;
    a.number = v;
    a.unit = std::move(unit);
    return a;
}

AnswerValue AnswerValue::from_percent(double v) {
    AnswerValue a;
    a.kind = AnswerKind::Percent;
    a.number = v;
    return a;
}

AnswerValue AnswerValue::from_boolean(bool v) {
    AnswerValue a;
    a.kind = AnswerKind::Boolean;
    a.boolean = v;
    return a;
}

AnswerValue AnswerValue::from_text(std::string v) {
    AnswerValue a;
    a.kind = AnswerKind::Text;
    a.text = std::move(v);
    return a;
}

std::string to_string(AnswerKind k) {
    switch (k) {
        case AnswerKind::Number: return "number";
        case AnswerKind::Percent: return "percent";
        case AnswerKind::Boolean: return "boolean";
        case AnswerKind::Text: return "text";
    }
    return "text";
}

AnswerKind answer_kind_from_string(std::string_view s) {
    if (s == "number") return AnswerKind::Number;
    if (s == "percent") return AnswerKind::Percent;
    if (s == "boolean") return AnswerKind::Boolean;
    return AnswerKind::Text;
}

namespace {

struct NumberScan {
    double value = 0.0;
    bool percent = false;
    bool currency = false;
    bool ok = false;
};

// Accepts: [-]$?digits[,ddd]*[.frac][ suffix][%]
// suffix: m/b/k letters or million/billion/thousand words.
NumberScan scan_number(std::string_view s) {
    NumberScan r;
    s = trim(s);
    if (s.empty()) return r;
    std::string cleaned;
    size_t i = 0;
    bool neg = false;
    if (s[i] == '-' || s[i] == '+') {
        neg = s[i] == '-';
        ++i;
    }
    if (i < s.size() && (s[i] == '$')) {
        r.currency = true;
        ++i;
        if (i < s.size() && (s[i] == '-' || s[i] == '+')) {  // "$-5"
            neg = neg || s[i] == '-';
            ++i;
        }
    }
    bool saw_digit = false;
    bool saw_dot = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            cleaned += c;
            saw_digit = true;
        } else if (c == ',') {
            continue;  // thousands separator
        } else if (c == '.' && !saw_dot) {
            cleaned += c;
            saw_dot = true;
        } else {
            break;
        }
    }
    if (!saw_digit) return r;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), v);
    if (ec != std::errc() || ptr != cleaned.data() + cleaned.size()) return r;

    std::string rest = fold(trim(s.substr(i)));
    double mult = 1.0;
    auto strip_prefix = [&rest](std::string_view p) {
        if (rest.rfind(p, 0) == 0) {
            rest = std::string(trim(std::string_view(rest).substr(p.size())));
            return true;
        }
        return false;
    };
    if (strip_prefix("billions") || strip_prefix("billion") || strip_prefix("bn") ||
        strip_prefix("b")) {
        mult = 1e9;
    } else if (strip_prefix("millions") || strip_prefix("million") || strip_prefix("mm") ||
               strip_prefix("m")) {
        mult = 1e6;
    } else if (strip_prefix("thousands") || strip_prefix("thousand") || strip_prefix("k")) {
        mult = 1e3;
    }
    if (strip_prefix("%") || strip_prefix("percent")) {
        r.percent = true;
    }
    if (!rest.empty()) return r;  // trailing junk: not a clean numeric answer
    r.value = (neg ? -v : v) * (r.percent ? 1.0 : mult);
    r.ok = true;
    return r;
}

}  // namespace

AnswerValue parse_answer_value(std::string_view raw) {
    std::string_view s = trim(raw);
    if (s.empty()) return AnswerValue::from_text("");
    // Strip surrounding quotes and a trailing period.
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
        s = trim(s);
    }
    if (!s.empty() && s.back() == '.' && s.find_first_of("0123456789") == std::string_view::npos) {
        s.remove_suffix(1);
        s = trim(s);
    }
    const std::string folded = fold(s);
    if (folded == "yes" || folded == "true") return AnswerValue::from_boolean(true);
    if (folded == "no" || folded == "false") return AnswerValue::from_boolean(false);

    NumberScan n = scan_number(s);
    if (n.ok) {
        if (n.percent) return AnswerValue::from_percent(n.value);
        if (n.currency) return AnswerValue::from_number(n.value, "$");
        return AnswerValue::from_number(n.value);
    }
    return AnswerValue::from_text(std::string(s));
}

std::optional<double> parse_number(std::string_view raw) {
    NumberScan n = scan_number(raw);
    if (!n.ok) return std::nullopt;
    return n.value;
}

namespace {

std::string format_double(double v) {
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

std::string format_answer(const AnswerValue& a) {
    switch (a.kind) {
        case AnswerKind::Number: {
            std::string s = format_double(a.number);
            if (a.unit && *a.unit == "$") return "$" + s;
            if (a.unit) return s + " " + *a.unit;
            return s;
        }
        case AnswerKind::Percent: return format_double(a.number) + "%";
        case AnswerKind::Boolean: return a.boolean ? "yes" : "no";
        case AnswerKind::Text: return a.text;
    }
    return a.text;
}

nlohmann::json answer_to_json(const AnswerValue& a) {
    nlohmann::json j;
    j["kind"] = to_string(a.kind);
    switch (a.kind) {
        case AnswerKind::Number:
        case AnswerKind::Percent: j["value"] = a.number; break;
        case AnswerKind::Boolean: j["value"] = a.boolean; break;
        case AnswerKind::Text: j["value"] = a.text; break;
    }
    if (a.unit) {
        j["unit"] = *a.unit;
    } else {
        j["unit"] = nullptr;
    }
    return j;
}

AnswerValue answer_from_json(const nlohmann::json& j) {
    AnswerValue a;
    a.kind = answer_kind_from_string(j.at("kind").get<std::string>());
    switch (a.kind) {
        case AnswerKind::Number:
        case AnswerKind::Percent: a.number = j.at("value").get<double>(); break;
        case AnswerKind::Boolean: a.boolean = j.at("value").get<bool>(); break;
        case AnswerKind::Text: a.text = j.at("value").get<std::string>(); break;
    }
    if (j.contains("unit") && !j["unit"].is_null()) a.unit = j["unit"].get<std::string>();
    return a;
}

}  // namespace finrag::answer
