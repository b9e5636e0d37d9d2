#include "finrag/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace finrag::eval {

DatasetFormat dataset_format_from_string(std::string_view s) {
    if (s == "finqa") return DatasetFormat::FinQA;
    if (s == "convfinqa") return DatasetFormat::ConvFinQA;
    if (s == "tatqa") return DatasetFormat::TatQA;
    if (s == "native") return DatasetFormat::Native;
    throw EvalError("unknown dataset format: " + std::string(s));
}

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EvalError("cannot open dataset file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw EvalError("dataset file is not valid JSON: " + path);
    return j;
}

corpus::Table table_from_rows(const nlohmann::json& rows) {
    corpus::Table t;
    if (!rows.is_array() || rows.empty()) throw EvalError("table must be a non-empty array");
    auto cell_string = [](const nlohmann::json& c) {
        return c.is_string() ? c.get<std::string>() : c.dump();
    };
    for (const auto& h : rows[0]) t.headers.push_back(cell_string(h));
    for (size_t r = 1; r < rows.size(); ++r) {
        std::vector<std::string> row;
        for (const auto& c : rows[r]) row.push_back(cell_string(c));
        row.resize(t.headers.size());  // releases occasionally carry ragged filler cells
        t.rows.push_back(std::move(row));
    }
    return t;
}

// Shared FinQA/ConvFinQA page shape: pre_text paragraphs, one table, post_text
// paragraphs, in source order.
corpus::Document document_from_finqa_entry(const nlohmann::json& e, const std::string& id) {
    corpus::Document doc;
    doc.id = id;
    if (e.contains("pre_text")) {
        for (const auto& p : e["pre_text"]) {
            if (p.is_string() && !p.get<std::string>().empty()) {
                doc.segments.push_back(corpus::Segment::make_text(p.get<std::string>()));
            }
        }
    }
    if (e.contains("table") && e["table"].is_array() && !e["table"].empty()) {
        doc.segments.push_back(corpus::Segment::make_table(table_from_rows(e["table"])));
    }
    if (e.contains("post_text")) {
        for (const auto& p : e["post_text"]) {
            if (p.is_string() && !p.get<std::string>().empty()) {
                doc.segments.push_back(corpus::Segment::make_text(p.get<std::string>()));
            }
        }
    }
    if (e.contains("filename") && e["filename"].is_string()) {
        doc.source_meta["filing"] = e["filename"].get<std::string>();
    }
    return doc;
}

LoadedDataset load_native(const nlohmann::json& j) {
    LoadedDataset out;
    if (j.contains("documents")) {
        for (const auto& jd : j["documents"]) {
            try {
                out.documents.push_back(corpus::parse_document(jd));
            } catch (const std::exception&) {
                ++out.skipped;
            }
        }
    }
    if (!j.contains("examples") || !j["examples"].is_array()) {
        throw EvalError("native dataset requires an examples array");
    }
    for (const auto& je : j["examples"]) {
        try {
            QAExample ex;
            ex.id = je.at("id").get<std::string>();
            ex.question = je.at("question").get<std::string>();
            if (ex.question.empty()) throw EvalError("empty question");
            if (je.contains("answer") && je["answer"].is_object()) {
                ex.gold_answer = answer::answer_from_json(je["answer"]);
            } else {
                ex.gold_answer = answer::parse_answer_value(
                    je.at("answer").is_string() ? je["answer"].get<std::string>()
                                                : je["answer"].dump());
            }
            if (je.contains("program") && je["program"].is_string()) {
                ex.gold_program = je["program"].get<std::string>();
            }
            if (je.contains("gold_passage_ids")) {
                for (const auto& g : je["gold_passage_ids"]) {
                    ex.gold_passage_ids.push_back(g.get<std::string>());
                }
            }
            if (je.contains("conversation_id") && je["conversation_id"].is_string()) {
                ex.conversation_id = je["conversation_id"].get<std::string>();
            }
            if (je.contains("turn_index") && je["turn_index"].is_number()) {
                ex.turn_index = je["turn_index"].get<int>();
            }
            out.examples.push_back(std::move(ex));
        } catch (const std::exception&) {
            ++out.skipped;
        }
    }
    return out;
}

// Maps FinQA gold_inds keys ("text_3" / "table_2") onto corpus passage ids.
// text_j indexes the concatenation of pre_text and post_text; table_r is the
// r-th table line, row 0 being the header row.
std::vector<std::string> map_gold_inds(const nlohmann::json& qa, const corpus::Document& doc) {
    std::vector<std::string> out;
    if (!qa.contains("gold_inds")) return out;
    std::vector<int> text_segment_index;  // j-th text unit -> segment index
    int table_segment_index = -1;
    for (size_t s = 0; s < doc.segments.size(); ++s) {
        if (doc.segments[s].kind == corpus::SegmentKind::Table) {
            table_segment_index = static_cast<int>(s);
        } else {
            text_segment_index.push_back(static_cast<int>(s));
        }
    }
    auto add_key = [&](const std::string& key) {
        const auto us = key.rfind('_');
        if (us == std::string::npos) return;
        const std::string kind = key.substr(0, us);
        int idx = -1;
        try {
            idx = std::stoi(key.substr(us + 1));
        } catch (const std::exception&) {
            return;
        }
        if (kind == "text") {
            if (idx >= 0 && idx < static_cast<int>(text_segment_index.size())) {
                out.push_back(corpus::passage_id(doc.id, text_segment_index[static_cast<size_t>(idx)], 0));
            }
        } else if (kind == "table" && table_segment_index >= 0 && idx >= 1) {
            out.push_back(corpus::passage_id(doc.id, table_segment_index, idx - 1));
        }
    };
    if (qa["gold_inds"].is_object()) {
        for (auto it = qa["gold_inds"].begin(); it != qa["gold_inds"].end(); ++it) {
            add_key(it.key());
        }
    } else if (qa["gold_inds"].is_array()) {
        for (const auto& k : qa["gold_inds"]) {
            if (k.is_string()) add_key(k.get<std::string>());
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

LoadedDataset load_finqa(const nlohmann::json& j) {
    if (!j.is_array()) throw EvalError("finqa dataset must be a JSON array");
    LoadedDataset out;
    int anon = 0;
    for (const auto& e : j) {
        try {
            std::string id = e.contains("id") && e["id"].is_string()
                                 ? e["id"].get<std::string>()
                                 : "finqa-" + std::to_string(anon++);
            corpus::Document doc = document_from_finqa_entry(e, id);
            if (doc.segments.empty()) throw EvalError("entry has no content");
            const auto& qa = e.at("qa");
            QAExample ex;
            ex.id = id;
            ex.question = qa.at("question").get<std::string>();
            if (ex.question.empty()) throw EvalError("empty question");
            if (qa.contains("answer")) {
                ex.gold_answer = answer::parse_answer_value(
                    qa["answer"].is_string() ? qa["answer"].get<std::string>()
                                             : qa["answer"].dump());
            } else if (qa.contains("exe_ans")) {
                ex.gold_answer =
                    answer::AnswerValue::from_number(qa["exe_ans"].get<double>());
            } else {
                throw EvalError("qa record has no answer");
            }
            if (qa.contains("program") && qa["program"].is_string()) {
                ex.gold_program = qa["program"].get<std::string>();
            }
            ex.gold_passage_ids = map_gold_inds(qa, doc);
            out.documents.push_back(std::move(doc));
            out.examples.push_back(std::move(ex));
        } catch (const std::exception&) {
            ++out.skipped;
        }
    }
    return out;
}

LoadedDataset load_convfinqa(const nlohmann::json& j) {
    if (!j.is_array()) throw EvalError("convfinqa dataset must be a JSON array");
    LoadedDataset out;
    int anon = 0;
    for (const auto& e : j) {
        try {
            std::string id = e.contains("id") && e["id"].is_string()
                                 ? e["id"].get<std::string>()
                                 : "conv-" + std::to_string(anon++);
            corpus::Document doc = document_from_finqa_entry(e, id);
            if (doc.segments.empty()) throw EvalError("entry has no content");

            const auto& ann = e.at("annotation");
            const auto& turns = ann.at("dialogue_break");
            const nlohmann::json answers = ann.contains("exe_ans_list") ? ann["exe_ans_list"]
                                           : ann.contains("answer_list") ? ann["answer_list"]
                                                                         : nlohmann::json::array();
            if (!turns.is_array() || turns.empty()) throw EvalError("no dialogue turns");
            bool any = false;
            for (size_t t = 0; t < turns.size(); ++t) {
                QAExample ex;
                ex.id = id + "#t" + std::to_string(t);
                ex.question = turns[t].get<std::string>();
                if (ex.question.empty()) continue;
                if (t < answers.size()) {
                    const auto& a = answers[t];
                    ex.gold_answer = a.is_number()
                                         ? answer::AnswerValue::from_number(a.get<double>())
                                         : answer::parse_answer_value(
                                               a.is_string() ? a.get<std::string>() : a.dump());
                } else {
                    continue;  // turn without a gold answer
                }
                ex.conversation_id = id;
                ex.turn_index = static_cast<int>(t);
                out.examples.push_back(std::move(ex));
                any = true;
            }
            if (!any) throw EvalError("no usable turns");
            out.documents.push_back(std::move(doc));
        } catch (const std::exception&) {
            ++out.skipped;
        }
    }
    return out;
}

LoadedDataset load_tatqa(const nlohmann::json& j) {
    if (!j.is_array()) throw EvalError("tatqa dataset must be a JSON array");
    LoadedDataset out;
    int anon = 0;
    for (const auto& e : j) {
        try {
            std::string id;
            if (e.contains("table") && e["table"].is_object() && e["table"].contains("uid")) {
                id = e["table"]["uid"].get<std::string>();
            } else {
                id = "tatqa-" + std::to_string(anon++);
            }
            corpus::Document doc;
            doc.id = id;
            if (e.contains("paragraphs")) {
                for (const auto& p : e["paragraphs"]) {
                    const std::string text =
                        p.is_object() ? p.value("text", "") : (p.is_string() ? p.get<std::string>() : "");
                    if (!text.empty()) {
                        doc.segments.push_back(corpus::Segment::make_text(text));
                    }
                }
            }
            if (e.contains("table") && e["table"].is_object() && e["table"].contains("table")) {
                doc.segments.push_back(
                    corpus::Segment::make_table(table_from_rows(e["table"]["table"])));
            }
            if (doc.segments.empty()) throw EvalError("entry has no content");

            bool any = false;
            for (const auto& q : e.at("questions")) {
                QAExample ex;
                ex.id = q.contains("uid") && q["uid"].is_string() ? q["uid"].get<std::string>()
                                                                  : id + "-q";
                ex.question = q.value("question", "");
                if (ex.question.empty()) continue;
                if (!q.contains("answer")) continue;
                const auto& a = q["answer"];
                if (a.is_array()) {
                    std::string joined;
                    for (const auto& part : a) {
                        if (!joined.empty()) joined += ", ";
                        joined += part.is_string() ? part.get<std::string>() : part.dump();
                    }
                    ex.gold_answer = answer::parse_answer_value(joined);
                } else if (a.is_number()) {
                    ex.gold_answer = answer::AnswerValue::from_number(a.get<double>());
                } else {
                    ex.gold_answer = answer::parse_answer_value(
                        a.is_string() ? a.get<std::string>() : a.dump());
                }
                out.examples.push_back(std::move(ex));
                any = true;
            }
            if (!any) throw EvalError("no usable questions");
            out.documents.push_back(std::move(doc));
        } catch (const std::exception&) {
            ++out.skipped;
        }
    }
    return out;
}

}  // namespace

LoadedDataset load_dataset(const std::string& path, DatasetFormat format) {
    const nlohmann::json j = read_json_file(path);
    LoadedDataset out;
    switch (format) {
        case DatasetFormat::Native: out = load_native(j); break;
        case DatasetFormat::FinQA: out = load_finqa(j); break;
        case DatasetFormat::ConvFinQA: out = load_convfinqa(j); break;
        case DatasetFormat::TatQA: out = load_tatqa(j); break;
    }
    if (out.examples.empty()) {
        throw EvalError("dataset contains no valid examples: " + path);
    }
    return out;
}

namespace {

bool numeric_match(double pred, double gold) {
    if (gold == 0.0) return std::fabs(pred) <= 1e-4;
    return std::fabs(pred - gold) / std::max(std::fabs(gold), 1e-12) <= 0.01;
}

std::string normalize_text(std::string_view s) {
    std::string out;
    bool in_space = true;
    for (char ch : s) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += ' ';
        in_space = false;
        out += static_cast<char>(std::tolower(c));
    }
    while (!out.empty() && (out.back() == '.' || out.back() == ',')) out.pop_back();
    return out;
}

}  // namespace

bool exe_accuracy(const answer::AnswerValue& pred, const answer::AnswerValue& gold) {
    using answer::AnswerKind;
    if (pred.is_numeric() && gold.is_numeric()) {
        if (numeric_match(pred.number, gold.number)) return true;
        // Percent/decimal reconciliation applies only across kinds and only
        // when the values differ by exactly the x100 scale.
        if (pred.kind != gold.kind) {
            if (numeric_match(pred.number, gold.number * 100.0)) return true;
            if (numeric_match(pred.number * 100.0, gold.number)) return true;
        }
        return false;
    }
    if (pred.kind == AnswerKind::Boolean && gold.kind == AnswerKind::Boolean) {
        return pred.boolean == gold.boolean;
    }
    if (pred.kind == AnswerKind::Text && gold.kind == AnswerKind::Text) {
        return normalize_text(pred.text) == normalize_text(gold.text);
    }
    return false;
}

// ---------------------------------------------------------------------------
// Program canonicalization
// ---------------------------------------------------------------------------

namespace {

std::string canon_number(double v) {
    if (v == 0.0) v = 0.0;  // normalize -0
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

// Canonical expression string with commutative argument ordering for
// add/multiply (and min/max). Identifiers resolve to the canonical string of
// their reaching definition, so reassignment sequences canonicalize
// correctly.
std::string canon_expr(const program::ExprPtr& e,
                       const std::map<std::string, std::string>& canon_env) {
    using program::BinaryOp;
    using program::NodeKind;
    switch (e->kind) {
        case NodeKind::Number: return canon_number(e->number);
        case NodeKind::Ident: {
            auto it = canon_env.find(e->name);
            if (it == canon_env.end()) {
                throw EvalError("unbound identifier in program: " + e->name);
            }
            return it->second;
        }
        case NodeKind::Neg: {
            // Fold negation of literals into the operand.
            const auto inner = canon_expr(e->args[0], canon_env);
            if (!inner.empty() && (std::isdigit(static_cast<unsigned char>(inner[0])) ||
                                   inner[0] == '-' || inner[0] == '.')) {
                try {
                    return canon_number(-std::stod(inner));
                } catch (const std::exception&) {
                }
            }
            return "neg(" + inner + ")";
        }
        case NodeKind::Binary: {
            std::string a = canon_expr(e->args[0], canon_env);
            std::string b = canon_expr(e->args[1], canon_env);
            switch (e->op) {
                case BinaryOp::Add:
                    if (b < a) std::swap(a, b);
                    return "add(" + a + "," + b + ")";
                case BinaryOp::Mul:
                    if (b < a) std::swap(a, b);
                    return "multiply(" + a + "," + b + ")";
                case BinaryOp::Sub: return "subtract(" + a + "," + b + ")";
                case BinaryOp::Div: return "divide(" + a + "," + b + ")";
                case BinaryOp::Pow: return "exp(" + a + "," + b + ")";
            }
            throw EvalError("unknown operator");
        }
        case NodeKind::Call: {
            if (e->name == "round") {
                // Rounding is presentation, not structure.
                return canon_expr(e->args[0], canon_env);
            }
            std::vector<std::string> args;
            args.reserve(e->args.size());
            for (const auto& a : e->args) args.push_back(canon_expr(a, canon_env));
            if (e->name == "min" || e->name == "max") std::sort(args.begin(), args.end());
            std::string out = e->name + "(";
            for (size_t i = 0; i < args.size(); ++i) {
                if (i) out += ",";
                out += args[i];
            }
            return out + ")";
        }
    }
    throw EvalError("unknown node kind");
}

}  // namespace

std::string canonicalize_program(const program::Program& p) {
    std::map<std::string, std::string> canon_env;
    std::string result_canon;
    bool have_result = false;
    for (const auto& stmt : p.statements) {
        // All values of one statement see the pre-statement environment.
        std::vector<std::string> canons;
        canons.reserve(stmt.values.size());
        for (const auto& v : stmt.values) canons.push_back(canon_expr(v, canon_env));
        for (size_t i = 0; i < stmt.targets.size(); ++i) {
            canon_env[stmt.targets[i]] = canons[i];
            if (stmt.targets[i] == "result") {
                result_canon = canons[i];
                have_result = true;
            }
        }
    }
    if (!have_result) throw EvalError("program does not assign result");
    return result_canon;
}

namespace {

// Gold-program notation: "op(arg, arg), op(#0, arg)"; #i references the i-th
// prior operation's result, const_N denotes a literal.
struct GoldOp {
    std::string name;
    std::vector<std::string> args;
};

std::vector<GoldOp> parse_gold_ops(const std::string& text) {
    std::vector<GoldOp> ops;
    size_t i = 0;
    const size_t n = text.size();
    auto skip_ws = [&] {
        while (i < n && (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == ',')) ++i;
    };
    skip_ws();
    while (i < n) {
        GoldOp op;
        while (i < n && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
            op.name += text[i++];
        }
        if (op.name.empty() || i >= n || text[i] != '(') {
            throw EvalError("malformed gold program near position " + std::to_string(i));
        }
        ++i;  // '('
        std::string arg;
        int depth = 1;
        while (i < n && depth > 0) {
            const char c = text[i];
            if (c == '(') ++depth;
            if (c == ')') {
                --depth;
                if (depth == 0) break;
            }
            if (c == ',' && depth == 1) {
                op.args.push_back(arg);
                arg.clear();
            } else {
                arg += c;
            }
            ++i;
        }
        if (i >= n) throw EvalError("unterminated gold operation: " + op.name);
        op.args.push_back(arg);
        ++i;  // ')'
        for (auto& a : op.args) {
            while (!a.empty() && std::isspace(static_cast<unsigned char>(a.front()))) a.erase(a.begin());
            while (!a.empty() && std::isspace(static_cast<unsigned char>(a.back()))) a.pop_back();
        }
        ops.push_back(std::move(op));
        skip_ws();
    }
    if (ops.empty()) throw EvalError("empty gold program");
    return ops;
}

std::string canon_gold_arg(const std::string& arg, const std::vector<std::string>& prior) {
    if (!arg.empty() && arg[0] == '#') {
        const int ref = std::stoi(arg.substr(1));
        if (ref < 0 || ref >= static_cast<int>(prior.size())) {
            throw EvalError("gold program back-reference out of range: " + arg);
        }
        return prior[static_cast<size_t>(ref)];
    }
    std::string cleaned = arg;
    if (cleaned.rfind("const_", 0) == 0) cleaned = cleaned.substr(6);
    if (cleaned == "m1") return canon_number(-1.0);
    bool negative = false;
    if (!cleaned.empty() && cleaned[0] == 'm' &&
        cleaned.find_first_not_of("0123456789.", 1) == std::string::npos) {
        negative = true;
        cleaned = cleaned.substr(1);
    }
    std::string digits;
    for (char c : cleaned) {
        if (c == ',' || c == '$' || c == '%') continue;
        digits += c;
    }
    try {
        const double v = std::stod(digits);
        return canon_number(negative ? -v : v);
    } catch (const std::exception&) {
        throw EvalError("unsupported gold program operand: " + arg);
    }
}

}  // namespace

std::string canonicalize_gold_program(const std::string& gold) {
    const auto ops = parse_gold_ops(gold);
    std::vector<std::string> canon;
    canon.reserve(ops.size());
    for (const auto& op : ops) {
        std::vector<std::string> args;
        args.reserve(op.args.size());
        for (const auto& a : op.args) args.push_back(canon_gold_arg(a, canon));
        std::string name = op.name;
        if (name == "add" || name == "multiply") {
            if (args.size() != 2) throw EvalError("gold op arity: " + name);
            std::sort(args.begin(), args.end());
        } else if (name == "subtract" || name == "divide" || name == "exp") {
            if (args.size() != 2) throw EvalError("gold op arity: " + name);
        } else {
            throw EvalError("unsupported gold operation: " + name);
        }
        std::string s = name + "(" + args[0] + "," + args[1] + ")";
        canon.push_back(std::move(s));
    }
    return canon.back();
}

std::string program_to_op_sequence(const program::Program& p) {
    // Emit the canonical nested form as a flat op sequence with #refs.
    struct Emitter {
        std::vector<std::string> lines;
        std::map<std::string, int> seen;  // canonical subtree -> op index

        std::string emit(const std::string& canon) {
            // Leaf (number): return as-is.
            if (canon.find('(') == std::string::npos) return canon;
            auto it = seen.find(canon);
            if (it != seen.end()) return "#" + std::to_string(it->second);
            const auto open = canon.find('(');
            const std::string name = canon.substr(0, open);
            // Split top-level args (canon ends with the matching ')').
            std::vector<std::string> args;
            std::string arg;
            int depth = 0;
            for (size_t i = open + 1; i < canon.size(); ++i) {
                const char c = canon[i];
                if (c == '(') ++depth;
                if (c == ')') {
                    if (depth == 0) break;
                    --depth;
                }
                if (c == ',' && depth == 0) {
                    args.push_back(arg);
                    arg.clear();
                } else {
                    arg += c;
                }
            }
            args.push_back(arg);
            std::string line = name + "(";
            for (size_t i = 0; i < args.size(); ++i) {
                if (i) line += ", ";
                line += emit(args[i]);
            }
            line += ")";
            const int idx = static_cast<int>(lines.size());
            lines.push_back(line);
            seen[canon] = idx;
            return "#" + std::to_string(idx);
        }
    };
    Emitter em;
    const std::string canon = canonicalize_program(p);
    if (canon.find('(') == std::string::npos) {
        return "add(" + canon + ", 0)";  // constant program
    }
    em.emit(canon);
    std::string out;
    for (size_t i = 0; i < em.lines.size(); ++i) {
        if (i) out += ", ";
        out += em.lines[i];
    }
    return out;
}

bool prog_accuracy(const program::Program& pred, const std::string& gold_program) {
    const std::string gold_canon = canonicalize_gold_program(gold_program);  // may throw
    std::string pred_canon;
    try {
        pred_canon = canonicalize_program(pred);
    } catch (const EvalError&) {
        return false;
    }
    return pred_canon == gold_canon;
}

double answer_f1(const std::string& pred, const std::string& gold) {
    auto tokens = [](const std::string& s) {
        std::map<std::string, int> bag;
        std::string current;
        for (char ch : s) {
            unsigned char c = static_cast<unsigned char>(ch);
            if (std::isalnum(c)) {
                current += static_cast<char>(std::tolower(c));
            } else if (!current.empty()) {
                ++bag[current];
                current.clear();
            }
        }
        if (!current.empty()) ++bag[current];
        return bag;
    };
    const auto pb = tokens(pred);
    const auto gb = tokens(gold);
    long p_total = 0, g_total = 0, overlap = 0;
    for (const auto& [t, c] : pb) p_total += c;
    for (const auto& [t, c] : gb) g_total += c;
    if (p_total == 0 && g_total == 0) return 1.0;
    if (p_total == 0 || g_total == 0) return 0.0;
    for (const auto& [t, c] : pb) {
        auto it = gb.find(t);
        if (it != gb.end()) overlap += std::min(c, it->second);
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(p_total);
    const double recall = static_cast<double>(overlap) / static_cast<double>(g_total);
    return 2.0 * precision * recall / (precision + recall);
}

RecallReport recall_metrics(const std::vector<std::vector<std::string>>& ranked_ids,
                            const std::vector<std::vector<std::string>>& gold_ids,
                            const std::vector<int>& ks) {
    if (ranked_ids.size() != gold_ids.size()) {
        throw EvalError("ranked/gold query count mismatch");
    }
    RecallReport report;
    std::map<int, double> sums;
    double mrr_sum = 0.0;
    for (size_t q = 0; q < ranked_ids.size(); ++q) {
        if (gold_ids[q].empty()) continue;  // excluded
        ++report.n_queries;
        const std::set<std::string> gold(gold_ids[q].begin(), gold_ids[q].end());
        for (int k : ks) {
            int hit = 0;
            for (size_t i = 0; i < ranked_ids[q].size() && i < static_cast<size_t>(k); ++i) {
                if (gold.count(ranked_ids[q][i])) ++hit;
            }
            sums[k] += static_cast<double>(hit) / static_cast<double>(gold.size());
        }
        double rr = 0.0;
        for (size_t i = 0; i < ranked_ids[q].size(); ++i) {
            if (gold.count(ranked_ids[q][i])) {
                rr = 1.0 / static_cast<double>(i + 1);
                break;
            }
        }
        mrr_sum += rr;
    }
    if (report.n_queries > 0) {
        for (int k : ks) report.recall_at_k[k] = sums[k] / report.n_queries;
        report.mrr = mrr_sum / report.n_queries;
    }
    return report;
}

namespace {

double quantile(std::vector<double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

SignificanceReport significance(const std::vector<bool>& correct_a,
                                const std::vector<bool>& correct_b, int n_boot, unsigned seed) {
    if (correct_a.size() != correct_b.size()) {
        throw EvalError("correctness vectors must have equal length");
    }
    if (correct_a.empty()) throw EvalError("significance requires non-empty vectors");
    const size_t n = correct_a.size();

    SignificanceReport report;
    long sum_a = 0, sum_b = 0;
    for (size_t i = 0; i < n; ++i) {
        sum_a += correct_a[i] ? 1 : 0;
        sum_b += correct_b[i] ? 1 : 0;
        if (correct_a[i] && !correct_b[i]) ++report.discordant_a_only;
        if (!correct_a[i] && correct_b[i]) ++report.discordant_b_only;
    }
    report.accuracy_a = static_cast<double>(sum_a) / static_cast<double>(n);
    report.accuracy_b = static_cast<double>(sum_b) / static_cast<double>(n);

    // Paired bootstrap with a platform-stable index draw.
    std::mt19937 rng(seed);
    std::vector<double> boots_a, boots_b;
    boots_a.reserve(static_cast<size_t>(n_boot));
    boots_b.reserve(static_cast<size_t>(n_boot));
    for (int b = 0; b < n_boot; ++b) {
        long ca = 0, cb = 0;
        for (size_t i = 0; i < n; ++i) {
            const size_t idx = static_cast<size_t>(rng() % n);
            ca += correct_a[idx] ? 1 : 0;
            cb += correct_b[idx] ? 1 : 0;
        }
        boots_a.push_back(static_cast<double>(ca) / static_cast<double>(n));
        boots_b.push_back(static_cast<double>(cb) / static_cast<double>(n));
    }
    std::sort(boots_a.begin(), boots_a.end());
    std::sort(boots_b.begin(), boots_b.end());
    report.ci_a = {quantile(boots_a, 0.025), quantile(boots_a, 0.975)};
    report.ci_b = {quantile(boots_b, 0.025), quantile(boots_b, 0.975)};

    const double b_ = static_cast<double>(report.discordant_a_only);
    const double c_ = static_cast<double>(report.discordant_b_only);
    report.mcnemar_chi2 = (b_ + c_) > 0 ? (b_ - c_) * (b_ - c_) / (b_ + c_) : 0.0;
    return report;
}

const CostRow* CostReport::find(const std::string& label) const {
    for (const auto& r : rows) {
        if (r.label == label) return &r;
    }
    return nullptr;
}

CostReport cost_report(const std::vector<CostRecord>& records) {
    CostReport report;
    std::vector<std::string> order;
    std::map<std::string, std::vector<const CostRecord*>> by_label;
    for (const auto& r : records) {
        if (r.label.empty()) continue;  // omitted row
        if (!by_label.count(r.label)) order.push_back(r.label);
        by_label[r.label].push_back(&r);
    }
    for (const auto& label : order) {
        const auto& rs = by_label[label];
        CostRow row;
        row.label = label;
        row.n = static_cast<int>(rs.size());
        long with_correct = 0, correct = 0;
        for (const auto* r : rs) {
            row.mean_api_calls += r->api_calls;
            row.mean_latency_ms += r->latency_ms;
            row.mean_cost += r->cost;
            if (r->correct) {
                ++with_correct;
                if (*r->correct) ++correct;
            }
        }
        row.mean_api_calls /= row.n;
        row.mean_latency_ms /= row.n;
        row.mean_cost /= row.n;
        row.accuracy = with_correct > 0 ? static_cast<double>(correct) / with_correct : 0.0;
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::vector<CostRecord> cost_records_from_traces(const std::vector<std::string>& trace_lines,
                                                 const std::string& label,
                                                 const std::vector<bool>& correctness) {
    if (!correctness.empty() && correctness.size() != trace_lines.size()) {
        throw EvalError("correctness vector must match the trace count");
    }
    std::vector<CostRecord> records;
    records.reserve(trace_lines.size());
    for (size_t i = 0; i < trace_lines.size(); ++i) {
        const auto j = nlohmann::json::parse(trace_lines[i]);
        CostRecord r;
        r.label = label;
        r.api_calls = j.at("totals").at("llm_calls").get<double>();
        r.latency_ms = j.at("totals").at("latency_ms").get<double>();
        r.cost = j.at("totals").at("est_cost").get<double>();
        if (!correctness.empty()) r.correct = correctness[i];
        records.push_back(std::move(r));
    }
    return records;
}

double call_reduction(const CostReport& report, const std::string& label_on,
                      const std::string& label_off) {
    const CostRow* on = report.find(label_on);
    const CostRow* off = report.find(label_off);
    if (!on || !off || off->mean_api_calls <= 0.0) {
        throw EvalError("call_reduction requires both labels with nonzero baseline calls");
    }
    return 1.0 - on->mean_api_calls / off->mean_api_calls;
}

nlohmann::json metric_report_to_json(const MetricReport& r) {
    nlohmann::json recall = nlohmann::json::object();
    for (const auto& [k, v] : r.recall_at_k) recall["recall@" + std::to_string(k)] = v;
    return nlohmann::json{{"exe_acc", r.exe_acc},
                          {"prog_acc", r.prog_acc},
                          {"prog_n", r.prog_n},
                          {"turn_acc", r.turn_acc},
                          {"conversation_acc", r.conversation_acc},
                          {"f1", r.f1},
                          {"recall", recall},
                          {"mrr", r.mrr},
                          {"avg_api_calls", r.avg_api_calls},
                          {"avg_latency_ms", r.avg_latency_ms},
                          {"est_cost", r.est_cost},
                          {"n", r.n}};
}

std::string metric_report_table(const MetricReport& r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "metric              value\n";
    os << "------------------  --------\n";
    os << "n                   " << r.n << "\n";
    os << "exe_acc             " << r.exe_acc << "\n";
    if (r.prog_n > 0) os << "prog_acc            " << r.prog_acc << "  (n=" << r.prog_n << ")\n";
    os << "turn_acc            " << r.turn_acc << "\n";
    os << "conversation_acc    " << r.conversation_acc << "\n";
    os << "f1                  " << r.f1 << "\n";
    for (const auto& [k, v] : r.recall_at_k) {
        os << "recall@" << k << (k < 10 ? "            " : "           ") << v << "\n";
    }
    os << "mrr                 " << r.mrr << "\n";
    os << "avg_api_calls       " << r.avg_api_calls << "\n";
    os << "avg_latency_ms      " << r.avg_latency_ms << "\n";
    os << "est_cost_per_q      " << std::setprecision(6) << r.est_cost << "\n";
    return os.str();
}

namespace {

struct EvalGroup {
    std::optional<std::string> conversation_id;
    std::vector<size_t> example_indices;  // in turn order
};

std::optional<program::Program> extract_pred_program(const agent::AgentTrace& trace) {
    for (auto it = trace.iterations.rbegin(); it != trace.iterations.rend(); ++it) {
        if (it->outcome && it->outcome->mode == reason::ReasoningMode::Pot) {
            try {
                return program::parse_program(it->outcome->chain_or_program);
            } catch (const program::ProgramError&) {
                return std::nullopt;
            }
        }
    }
    return std::nullopt;
}

std::vector<std::string> ranked_ids_from_trace(const agent::AgentTrace& trace) {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& it : trace.iterations) {
        for (const auto& r : it.retrievals) {
            for (const auto& res : r.results) {
                if (seen.insert(res.passage_id).second) ids.push_back(res.passage_id);
            }
        }
    }
    return ids;
}

}  // namespace

EvalOutput run_evaluation(const LoadedDataset& dataset, const index::Index& idx,
                          const EvalRunConfig& cfg, const BackendFactory& make_backend,
                          const mining::Lexicon& lexicon,
                          std::shared_ptr<llm::UsageLedger> global_ledger, llm::CostModel cost,
                          std::optional<calibration::CalibrationModel> calibration,
                          std::optional<router::RouterModel> router_model) {
    // Group conversational examples by conversation id, preserving input
    // order; standalone questions are singleton groups.
    std::vector<EvalGroup> groups;
    std::map<std::string, size_t> group_of_conv;
    for (size_t i = 0; i < dataset.examples.size(); ++i) {
        const auto& ex = dataset.examples[i];
        if (ex.conversation_id) {
            auto it = group_of_conv.find(*ex.conversation_id);
            if (it == group_of_conv.end()) {
                group_of_conv[*ex.conversation_id] = groups.size();
                groups.push_back({ex.conversation_id, {i}});
            } else {
                groups[it->second].example_indices.push_back(i);
            }
        } else {
            groups.push_back({std::nullopt, {i}});
        }
    }

    std::vector<std::vector<agent::TurnResult>> results(groups.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const size_t g = next.fetch_add(1);
            if (g >= groups.size()) break;
            const auto& group = groups[g];
            try {
                agent::AgentBackends backends;
                backends.backend = make_backend();
                backends.ledger = global_ledger;
                backends.cost = cost;
                backends.calibration = calibration;
                backends.router_model = router_model;
                agent::Agent agent(idx, cfg.agent, backends, lexicon);
                if (group.conversation_id) {
                    std::vector<std::string> turns;
                    turns.reserve(group.example_indices.size());
                    for (size_t i : group.example_indices) {
                        turns.push_back(dataset.examples[i].question);
                    }
                    results[g] = agent.run_conversation(turns, *group.conversation_id);
                } else {
                    const auto& ex = dataset.examples[group.example_indices[0]];
                    results[g] = {agent.run_question(ex.question, ex.id)};
                }
            } catch (const std::exception& e) {
                // A failed group (e.g. an unscripted decompose call) must not
                // take the run down; every example gets an error result.
                results[g].clear();
                for (size_t i : group.example_indices) {
                    const auto& ex = dataset.examples[i];
                    agent::TurnResult r;
                    r.answer = answer::AnswerValue::from_text(std::string("error: ") + e.what());
                    r.trace.question = ex.question;
                    r.trace.question_id = ex.id;
                    r.trace.final_answer = r.answer;
                    if (group.conversation_id) {
                        r.trace.conversation_id = group.conversation_id;
                        r.trace.turn_index = ex.turn_index;
                    }
                    results[g].push_back(std::move(r));
                }
            }
        }
    };
    const int n_workers = std::max(1, cfg.workers);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    // Flatten results back to example order.
    std::vector<const agent::TurnResult*> per_example(dataset.examples.size(), nullptr);
    for (size_t g = 0; g < groups.size(); ++g) {
        const auto& group = groups[g];
        for (size_t t = 0; t < group.example_indices.size(); ++t) {
            if (t < results[g].size()) {
                per_example[group.example_indices[t]] = &results[g][t];
            }
        }
    }

    EvalOutput out;
    out.correctness.resize(dataset.examples.size(), false);

    long exe_correct = 0;
    long prog_correct = 0;
    int prog_n = 0;
    double f1_sum = 0.0;
    double calls_sum = 0.0, latency_sum = 0.0, cost_sum = 0.0;
    std::map<std::string, std::pair<int, int>> conv_counts;  // id -> (turns, correct)
    std::vector<std::vector<std::string>> ranked, gold_ids;

    for (size_t i = 0; i < dataset.examples.size(); ++i) {
        const auto& ex = dataset.examples[i];
        const agent::TurnResult* r = per_example[i];
        if (!r) throw EvalError("internal: missing result for example " + ex.id);

        const bool correct = exe_accuracy(r->answer, ex.gold_answer);
        out.correctness[i] = correct;
        exe_correct += correct ? 1 : 0;
        f1_sum += answer_f1(answer::format_answer(r->answer),
                            answer::format_answer(ex.gold_answer));

        if (ex.gold_program) {
            try {
                const std::string gold_canon = canonicalize_gold_program(*ex.gold_program);
                ++prog_n;
                const auto pred = extract_pred_program(r->trace);
                if (pred) {
                    try {
                        if (canonicalize_program(*pred) == gold_canon) ++prog_correct;
                    } catch (const EvalError&) {
                    }
                }
            } catch (const EvalError&) {
                // unparseable gold program: excluded from the denominator
            }
        }

        const std::string conv_key = ex.conversation_id ? *ex.conversation_id : ("__q__" + ex.id);
        auto& cc = conv_counts[conv_key];
        ++cc.first;
        cc.second += correct ? 1 : 0;

        calls_sum += r->trace.total_llm_calls;
        latency_sum += static_cast<double>(r->trace.latency_ms);
        cost_sum += r->trace.total_cost;

        if (!ex.gold_passage_ids.empty()) {
            ranked.push_back(ranked_ids_from_trace(r->trace));
            gold_ids.push_back(ex.gold_passage_ids);
        }

        out.trace_lines.push_back(agent::trace_to_json(r->trace).dump());
    }

    MetricReport& rep = out.report;
    rep.n = static_cast<int>(dataset.examples.size());
    rep.exe_acc = static_cast<double>(exe_correct) / rep.n;
    rep.turn_acc = rep.exe_acc;
    rep.prog_n = prog_n;
    rep.prog_acc = prog_n > 0 ? static_cast<double>(prog_correct) / prog_n : 0.0;
    long conv_total = 0, conv_all_correct = 0;
    for (const auto& [id, counts] : conv_counts) {
        ++conv_total;
        if (counts.second == counts.first) ++conv_all_correct;
    }
    rep.conversation_acc =
        conv_total > 0 ? static_cast<double>(conv_all_correct) / conv_total : 0.0;
    rep.f1 = f1_sum / rep.n;
    if (!ranked.empty()) {
        const RecallReport rr = recall_metrics(ranked, gold_ids, cfg.recall_ks);
        rep.recall_at_k = rr.recall_at_k;
        rep.mrr = rr.mrr;
    }
    rep.avg_api_calls = calls_sum / rep.n;
    rep.avg_latency_ms = latency_sum / rep.n;
    rep.est_cost = cost_sum / rep.n;
    return out;
}

}  // namespace finrag::eval
