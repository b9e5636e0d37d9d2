#include "finrag/program.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

namespace finrag::program {

std::string to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Syntax: return "syntax";
        case ErrorKind::ReadBeforeAssign: return "read_before_assign";
        case ErrorKind::MissingResult: return "missing_result";
        case ErrorKind::DisallowedCall: return "disallowed_call";
        case ErrorKind::BadArity: return "bad_arity";
        case ErrorKind::DivisionByZero: return "division_by_zero";
        case ErrorKind::DomainError: return "domain_error";
        case ErrorKind::Timeout: return "timeout";
        case ErrorKind::RangeViolation: return "range_violation";
    }
    return "syntax";
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Parse: return "parse";
        case Stage::StaticCheck: return "static_check";
        case Stage::Execute: return "execute";
        case Stage::RuntimeVerify: return "runtime_verify";
    }
    return "parse";
}

namespace {

std::string format_message(ErrorKind kind, Stage stage, const std::string& message, int line,
                           int column) {
    std::ostringstream os;
    os << to_string(stage) << " error [" << to_string(kind) << "]";
    if (line > 0) {
        os << " at line " << line;
        if (column > 0) os << ", column " << column;
    }
    os << ": " << message;
    return os.str();
}

}  // namespace

ProgramError::ProgramError(ErrorKind kind, Stage stage, std::string message, int line, int column)
    : std::runtime_error(format_message(kind, stage, message, line, column)),
      kind_(kind),
      stage_(stage),
      line_(line),
      column_(column) {}

ExprPtr Expr::make_number(double v, int line, int col) {
    auto e = std::make_shared<Expr>();
    e->kind = NodeKind::Number;
    e->number = v;
    e->line = line;
    e->column = col;
    return e;
}

ExprPtr Expr::make_ident(std::string name, int line, int col) {
    auto e = std::make_shared<Expr>();
    e->kind = NodeKind::Ident;
    e->name = std::move(name);
    e->line = line;
    e->column = col;
    return e;
}

ExprPtr Expr::make_neg(ExprPtr inner, int line, int col) {
    auto e = std::make_shared<Expr>();
    e->kind = NodeKind::Neg;
    e->args = {std::move(inner)};
    e->line = line;
    e->column = col;
    return e;
}

ExprPtr Expr::make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, int line, int col) {
    auto e = std::make_shared<Expr>();
    e->kind = NodeKind::Binary;
    e->op = op;
    e->args = {std::move(lhs), std::move(rhs)};
    e->line = line;
    e->column = col;
    return e;
}

ExprPtr Expr::make_call(std::string callee, std::vector<ExprPtr> args, int line, int col) {
    auto e = std::make_shared<Expr>();
    e->kind = NodeKind::Call;
    e->name = std::move(callee);
    e->args = std::move(args);
    e->line = line;
    e->column = col;
    return e;
}

const std::set<std::string>& default_allowlist() {
    static const std::set<std::string> allow{"round", "abs", "min", "max"};
    return allow;
}

namespace {

enum class TokKind { Number, Ident, Plus, Minus, Star, Slash, Pow, LParen, RParen, Comma, Assign, End };

struct Token {
    TokKind kind;
    std::string text;
    double number = 0.0;
    int line = 0;
    int column = 0;
};

class Lexer {
public:
    Lexer(std::string_view src, int line) : src_(src), line_(line) {}

    std::vector<Token> tokens() {
        std::vector<Token> out;
        while (true) {
            Token t = next();
            out.push_back(t);
            if (t.kind == TokKind::End) break;
        }
        return out;
    }

private:
    [[noreturn]] void fail(const std::string& msg, int col) const {
        throw ProgramError(ErrorKind::Syntax, Stage::Parse, msg, line_, col);
    }

    Token next() {
        while (pos_ < src_.size() &&
               (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\r')) {
            ++pos_;
        }
        const int col = static_cast<int>(pos_) + 1;
        if (pos_ >= src_.size() || src_[pos_] == '#') {
            return {TokKind::End, "", 0.0, line_, col};
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            return lex_number(col);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                          src_[pos_] == '_')) {
                ++pos_;
            }
            return {TokKind::Ident, std::string(src_.substr(start, pos_ - start)), 0.0, line_, col};
        }
        ++pos_;
        switch (c) {
            case '+': return {TokKind::Plus, "+", 0.0, line_, col};
            case '-': return {TokKind::Minus, "-", 0.0, line_, col};
            case '*':
                if (pos_ < src_.size() && src_[pos_] == '*') {
                    ++pos_;
                    return {TokKind::Pow, "**", 0.0, line_, col};
                }
                return {TokKind::Star, "*", 0.0, line_, col};
            case '/': return {TokKind::Slash, "/", 0.0, line_, col};
            case '(': return {TokKind::LParen, "(", 0.0, line_, col};
            case ')': return {TokKind::RParen, ")", 0.0, line_, col};
            case ',': return {TokKind::Comma, ",", 0.0, line_, col};
            case '=': return {TokKind::Assign, "=", 0.0, line_, col};
            default: fail(std::string("unexpected character '") + c + "'", col);
        }
    }

    Token lex_number(int col) {
        const size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                ++pos_;
            }
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            size_t save = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    ++pos_;
                }
            } else {
                pos_ = save;  // bare 'e' belongs to the next token
            }
        }
        const std::string text(src_.substr(start, pos_ - start));
        double v = 0.0;
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || p != text.data() + text.size()) {
            fail("malformed number literal '" + text + "'", col);
        }
        return {TokKind::Number, text, v, line_, col};
    }

    std::string_view src_;
    int line_;
    size_t pos_ = 0;
};

class LineParser {
public:
    LineParser(std::vector<Token> toks, int line) : toks_(std::move(toks)), line_(line) {}

    // expr_list at top level (comma-separated); used for assignments.
    std::vector<ExprPtr> parse_expr_list() {
        std::vector<ExprPtr> out;
        out.push_back(parse_expr());
        while (peek().kind == TokKind::Comma) {
            advance();
            out.push_back(parse_expr());
        }
        expect_end();
        return out;
    }

    ExprPtr parse_single() {
        ExprPtr e = parse_expr();
        expect_end();
        return e;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    const Token& advance() { return toks_[pos_++]; }

    [[noreturn]] void fail(const std::string& msg, const Token& at) const {
        throw ProgramError(ErrorKind::Syntax, Stage::Parse, msg, line_, at.column);
    }

    void expect_end() {
        if (peek().kind != TokKind::End) {
            fail("unexpected token '" + peek().text + "'", peek());
        }
    }

    ExprPtr parse_expr() { return parse_additive(); }

    ExprPtr parse_additive() {
        ExprPtr lhs = parse_multiplicative();
        while (peek().kind == TokKind::Plus || peek().kind == TokKind::Minus) {
            const Token op = advance();
            ExprPtr rhs = parse_multiplicative();
            lhs = Expr::make_binary(op.kind == TokKind::Plus ? BinaryOp::Add : BinaryOp::Sub,
                                    std::move(lhs), std::move(rhs), op.line, op.column);
        }
        return lhs;
    }

    ExprPtr parse_multiplicative() {
        ExprPtr lhs = parse_unary();
        while (peek().kind == TokKind::Star || peek().kind == TokKind::Slash) {
            const Token op = advance();
            ExprPtr rhs = parse_unary();
            lhs = Expr::make_binary(op.kind == TokKind::Star ? BinaryOp::Mul : BinaryOp::Div,
                                    std::move(lhs), std::move(rhs), op.line, op.column);
        }
        return lhs;
    }

    // Python-style: unary minus binds looser than '**' on its left,
    // but the right operand of '**' may itself be unary.
    ExprPtr parse_unary() {
        if (peek().kind == TokKind::Minus) {
            const Token op = advance();
            return Expr::make_neg(parse_unary(), op.line, op.column);
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_primary();
        if (peek().kind == TokKind::Pow) {
            const Token op = advance();
            ExprPtr exponent = parse_unary();  // right associative
            return Expr::make_binary(BinaryOp::Pow, std::move(base), std::move(exponent), op.line,
                                     op.column);
        }
        return base;
    }

    ExprPtr parse_primary() {
        const Token& t = peek();
        switch (t.kind) {
            case TokKind::Number: {
                advance();
                return Expr::make_number(t.number, t.line, t.column);
            }
            case TokKind::Ident: {
                advance();
                if (peek().kind == TokKind::LParen) {
                    advance();
                    std::vector<ExprPtr> args;
                    if (peek().kind != TokKind::RParen) {
                        args.push_back(parse_expr());
                        while (peek().kind == TokKind::Comma) {
                            advance();
                            args.push_back(parse_expr());
                        }
                    }
                    if (peek().kind != TokKind::RParen) {
                        fail("expected ')' in call to '" + t.text + "'", peek());
                    }
                    advance();
                    return Expr::make_call(t.text, std::move(args), t.line, t.column);
                }
                return Expr::make_ident(t.text, t.line, t.column);
            }
            case TokKind::LParen: {
                advance();
                ExprPtr inner = parse_expr();
                if (peek().kind != TokKind::RParen) {
                    fail("expected ')'", peek());
                }
                advance();
                return inner;
            }
            case TokKind::End: fail("unexpected end of expression", t);
            default: fail("unexpected token '" + t.text + "'", t);
        }
    }

    std::vector<Token> toks_;
    int line_;
    size_t pos_ = 0;
};

void collect_reads(const ExprPtr& e, std::vector<const Expr*>& out) {
    if (e->kind == NodeKind::Ident) out.push_back(e.get());
    for (const auto& a : e->args) collect_reads(a, out);
}

}  // namespace

Program parse_program(const std::string& text) {
    Program p;
    p.source = text;

    std::istringstream in(text);
    std::string raw_line;
    int line_no = 0;
    while (std::getline(in, raw_line)) {
        ++line_no;
        std::vector<Token> toks = Lexer(raw_line, line_no).tokens();
        if (toks.size() == 1) continue;  // blank or comment-only line

        // Split on the single '=' into target list and expression list.
        size_t assign_pos = std::string::npos;
        for (size_t i = 0; i < toks.size(); ++i) {
            if (toks[i].kind == TokKind::Assign) {
                if (assign_pos != std::string::npos) {
                    throw ProgramError(ErrorKind::Syntax, Stage::Parse, "multiple '=' on one line",
                                       line_no, toks[i].column);
                }
                assign_pos = i;
            }
        }
        if (assign_pos == std::string::npos) {
            throw ProgramError(ErrorKind::Syntax, Stage::Parse,
                               "expected an assignment 'name = expression'", line_no,
                               toks.front().column);
        }

        Statement stmt;
        stmt.line = line_no;
        // Targets: IDENT (',' IDENT)*
        size_t i = 0;
        while (true) {
            if (i >= assign_pos || toks[i].kind != TokKind::Ident) {
                throw ProgramError(ErrorKind::Syntax, Stage::Parse,
                                   "assignment target must be an identifier", line_no,
                                   toks[i < toks.size() ? i : toks.size() - 1].column);
            }
            stmt.targets.push_back(toks[i].text);
            ++i;
            if (i == assign_pos) break;
            if (toks[i].kind != TokKind::Comma) {
                throw ProgramError(ErrorKind::Syntax, Stage::Parse,
                                   "expected ',' or '=' after assignment target", line_no,
                                   toks[i].column);
            }
            ++i;
        }

        std::vector<Token> rhs(toks.begin() + static_cast<long>(assign_pos) + 1, toks.end());
        if (rhs.empty() || rhs.front().kind == TokKind::End) {
            throw ProgramError(ErrorKind::Syntax, Stage::Parse, "missing expression after '='",
                               line_no, toks[assign_pos].column);
        }
        stmt.values = LineParser(std::move(rhs), line_no).parse_expr_list();
        if (stmt.values.size() != stmt.targets.size()) {
            std::ostringstream os;
            os << "assignment arity mismatch: " << stmt.targets.size() << " target(s), "
               << stmt.values.size() << " value(s)";
            throw ProgramError(ErrorKind::Syntax, Stage::Parse, os.str(), line_no,
                               toks[assign_pos].column);
        }
        p.statements.push_back(std::move(stmt));
    }

    if (p.statements.empty()) {
        throw ProgramError(ErrorKind::Syntax, Stage::Parse, "empty program", 1, 1);
    }

    // Every identifier read must have been assigned by an earlier statement.
    std::set<std::string> assigned;
    for (const auto& stmt : p.statements) {
        for (const auto& value : stmt.values) {
            std::vector<const Expr*> reads;
            collect_reads(value, reads);
            for (const Expr* r : reads) {
                if (!assigned.count(r->name)) {
                    throw ProgramError(ErrorKind::ReadBeforeAssign, Stage::Parse,
                                       "identifier '" + r->name + "' read before assignment",
                                       r->line, r->column);
                }
            }
        }
        for (const auto& t : stmt.targets) assigned.insert(t);
    }

    const auto& final_targets = p.statements.back().targets;
    if (std::find(final_targets.begin(), final_targets.end(), "result") == final_targets.end()) {
        throw ProgramError(ErrorKind::MissingResult, Stage::Parse,
                           "final statement must assign 'result'", p.statements.back().line, 1);
    }
    return p;
}

ExprPtr parse_arithmetic_expression(const std::string& text) {
    std::vector<Token> toks = Lexer(text, 1).tokens();
    if (toks.size() == 1) {
        throw ProgramError(ErrorKind::Syntax, Stage::Parse, "empty expression", 1, 1);
    }
    return LineParser(std::move(toks), 1).parse_single();
}

namespace {

void check_expr(const ExprPtr& e, const std::set<std::string>& allowlist,
                std::vector<Violation>& out) {
    if (e->kind == NodeKind::Call) {
        if (!allowlist.count(e->name)) {
            out.push_back({ErrorKind::DisallowedCall, "disallowed call: " + e->name, e->line,
                           e->column});
        } else {
            const size_t n = e->args.size();
            bool ok = true;
            std::string expected;
            if (e->name == "round") {
                ok = n == 1 || n == 2;
                expected = "1 or 2";
            } else if (e->name == "abs") {
                ok = n == 1;
                expected = "1";
            } else {  // min / max
                ok = n >= 2;
                expected = "at least 2";
            }
            if (!ok) {
                std::ostringstream os;
                os << e->name << " expects " << expected << " argument(s), got " << n;
                out.push_back({ErrorKind::BadArity, os.str(), e->line, e->column});
            }
        }
    }
    for (const auto& a : e->args) check_expr(a, allowlist, out);
}

}  // namespace

std::vector<Violation> static_check(const Program& p, const std::set<std::string>& allowlist) {
    std::vector<Violation> out;
    for (const auto& stmt : p.statements) {
        for (const auto& value : stmt.values) check_expr(value, allowlist, out);
    }
    return out;
}

namespace {

class Interpreter {
public:
    Interpreter(int timeout_ms, std::function<double()> elapsed_ms)
        : timeout_ms_(timeout_ms), elapsed_ms_(std::move(elapsed_ms)) {
        if (!elapsed_ms_) {
            const auto start = std::chrono::steady_clock::now();
            elapsed_ms_ = [start]() {
                return std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                    .count();
            };
        }
    }

    double run(const Program& p) {
        std::map<std::string, double> env;
        for (const auto& stmt : p.statements) {
            check_deadline(stmt.line, 1);
            std::vector<double> values;
            values.reserve(stmt.values.size());
            for (const auto& v : stmt.values) values.push_back(eval(v, env));
            for (size_t i = 0; i < stmt.targets.size(); ++i) {
                env[stmt.targets[i]] = values[i];
            }
        }
        auto it = env.find("result");
        if (it == env.end()) {
            throw ProgramError(ErrorKind::MissingResult, Stage::Execute, "'result' never assigned");
        }
        return it->second;
    }

    double eval(const ExprPtr& e, const std::map<std::string, double>& env) {
        check_deadline(e->line, e->column);
        switch (e->kind) {
            case NodeKind::Number: return e->number;
            case NodeKind::Ident: {
                auto it = env.find(e->name);
                if (it == env.end()) {
                    throw ProgramError(ErrorKind::ReadBeforeAssign, Stage::Execute,
                                       "identifier '" + e->name + "' is unbound", e->line,
                                       e->column);
                }
                return it->second;
            }
            case NodeKind::Neg: return -eval(e->args[0], env);
            case NodeKind::Binary: return eval_binary(e, env);
            case NodeKind::Call: return eval_call(e, env);
        }
        throw ProgramError(ErrorKind::DomainError, Stage::Execute, "unknown node kind");
    }

private:
    void check_deadline(int line, int col) {
        if (elapsed_ms_() >= static_cast<double>(timeout_ms_)) {
            throw ProgramError(ErrorKind::Timeout, Stage::Execute,
                               "execution exceeded " + std::to_string(timeout_ms_) + " ms", line,
                               col);
        }
    }

    double require_finite(double v, const ExprPtr& at, const std::string& what) {
        if (!std::isfinite(v)) {
            throw ProgramError(ErrorKind::DomainError, Stage::Execute, what, at->line, at->column);
        }
        return v;
    }

    double eval_binary(const ExprPtr& e, const std::map<std::string, double>& env) {
        const double lhs = eval(e->args[0], env);
        const double rhs = eval(e->args[1], env);
        switch (e->op) {
            case BinaryOp::Add: return require_finite(lhs + rhs, e, "non-finite sum");
            case BinaryOp::Sub: return require_finite(lhs - rhs, e, "non-finite difference");
            case BinaryOp::Mul: return require_finite(lhs * rhs, e, "non-finite product");
            case BinaryOp::Div:
                if (rhs == 0.0) {
                    throw ProgramError(ErrorKind::DivisionByZero, Stage::Execute,
                                       "division by zero", e->line, e->column);
                }
                return require_finite(lhs / rhs, e, "non-finite quotient");
            case BinaryOp::Pow: {
                const double v = std::pow(lhs, rhs);
                if (std::isnan(v)) {
                    throw ProgramError(ErrorKind::DomainError, Stage::Execute,
                                       "fractional power of a negative base", e->line, e->column);
                }
                return require_finite(v, e, "non-finite power");
            }
        }
        throw ProgramError(ErrorKind::DomainError, Stage::Execute, "unknown operator");
    }

    double eval_call(const ExprPtr& e, const std::map<std::string, double>& env) {
        if (!default_allowlist().count(e->name)) {
            throw ProgramError(ErrorKind::DisallowedCall, Stage::Execute,
                               "disallowed call: " + e->name, e->line, e->column);
        }
        std::vector<double> args;
        args.reserve(e->args.size());
        for (const auto& a : e->args) args.push_back(eval(a, env));
        if (e->name == "abs") {
            if (args.size() != 1) {
                throw ProgramError(ErrorKind::BadArity, Stage::Execute, "abs expects 1 argument",
                                   e->line, e->column);
            }
            return std::fabs(args[0]);
        }
        if (e->name == "round") {
            if (args.size() != 1 && args.size() != 2) {
                throw ProgramError(ErrorKind::BadArity, Stage::Execute,
                                   "round expects 1 or 2 arguments", e->line, e->column);
            }
            double ndigits = args.size() == 2 ? args[1] : 0.0;
            if (std::fabs(ndigits - std::round(ndigits)) > 1e-9 || std::fabs(ndigits) > 15) {
                throw ProgramError(ErrorKind::DomainError, Stage::Execute,
                                   "round digits must be a small integer", e->line, e->column);
            }
            const double scale = std::pow(10.0, std::round(ndigits));
            return require_finite(std::round(args[0] * scale) / scale, e, "non-finite round");
        }
        if (args.size() < 2) {
            throw ProgramError(ErrorKind::BadArity, Stage::Execute,
                               e->name + " expects at least 2 arguments", e->line, e->column);
        }
        double v = args[0];
        for (size_t i = 1; i < args.size(); ++i) {
            v = e->name == "min" ? std::min(v, args[i]) : std::max(v, args[i]);
        }
        return v;
    }

    int timeout_ms_;
    std::function<double()> elapsed_ms_;
};

}  // namespace

double execute_program(const Program& p, int timeout_ms, std::function<double()> elapsed_ms) {
    return Interpreter(timeout_ms, std::move(elapsed_ms)).run(p);
}

double evaluate_expression(const ExprPtr& expr) {
    Interpreter interp(5000, nullptr);
    return interp.eval(expr, {});
}

void verify_runtime_value(double value, double bound) {
    if (!std::isfinite(value)) {
        throw ProgramError(ErrorKind::DomainError, Stage::RuntimeVerify, "non-finite result");
    }
    if (std::fabs(value) > bound) {
        std::ostringstream os;
        os << "result " << value << " outside plausible range [" << -bound << ", " << bound << "]";
        throw ProgramError(ErrorKind::RangeViolation, Stage::RuntimeVerify, os.str());
    }
}

double range_bound_from_evidence(const std::vector<std::string>& evidence) {
    double max_literal = 0.0;
    for (const auto& text : evidence) {
        // Scan plain numeric literals; commas allowed as thousands separators.
        size_t i = 0;
        while (i < text.size()) {
            if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
                ++i;
                continue;
            }
            std::string digits;
            bool dot = false;
            while (i < text.size()) {
                const char c = text[i];
                if (std::isdigit(static_cast<unsigned char>(c))) {
                    digits += c;
                } else if (c == ',') {
                    // skip separators
                } else if (c == '.' && !dot) {
                    digits += c;
                    dot = true;
                } else {
                    break;
                }
                ++i;
            }
            if (!digits.empty() && digits != ".") {
                max_literal = std::max(max_literal, std::fabs(std::stod(digits)));
            }
        }
    }
    return std::max(1e6, 1e6 * max_literal);
}

namespace {

int precedence(const Expr& e) {
    switch (e.kind) {
        case NodeKind::Binary:
            switch (e.op) {
                case BinaryOp::Add:
                case BinaryOp::Sub: return 1;
                case BinaryOp::Mul:
                case BinaryOp::Div: return 2;
                case BinaryOp::Pow: return 4;
            }
            return 1;
        case NodeKind::Neg: return 3;
        default: return 5;  // atoms
    }
}

std::string format_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void print_expr(const ExprPtr& e, std::string& out) {
    switch (e->kind) {
        case NodeKind::Number:
            if (e->number < 0) {
                out += '(';
                out += format_number(e->number);
                out += ')';
            } else {
                out += format_number(e->number);
            }
            return;
        case NodeKind::Ident: out += e->name; return;
        case NodeKind::Neg: {
            out += '-';
            const bool paren = precedence(*e->args[0]) < precedence(*e);
            if (paren) out += '(';
            print_expr(e->args[0], out);
            if (paren) out += ')';
            return;
        }
        case NodeKind::Binary: {
            const int prec = precedence(*e);
            const char* op = nullptr;
            switch (e->op) {
                case BinaryOp::Add: op = " + "; break;
                case BinaryOp::Sub: op = " - "; break;
                case BinaryOp::Mul: op = " * "; break;
                case BinaryOp::Div: op = " / "; break;
                case BinaryOp::Pow: op = " ** "; break;
            }
            // Left child: parenthesize when looser, or equal for the
            // right-associative '**'. Right child: parenthesize when looser
            // or equal for left-associative operators.
            const bool lparen = precedence(*e->args[0]) < prec ||
                                (e->op == BinaryOp::Pow && precedence(*e->args[0]) == prec);
            const bool rparen = e->op == BinaryOp::Pow
                                    ? precedence(*e->args[1]) < prec
                                    : precedence(*e->args[1]) <= prec;
            if (lparen) out += '(';
            print_expr(e->args[0], out);
            if (lparen) out += ')';
            out += op;
            if (rparen) out += '(';
            print_expr(e->args[1], out);
            if (rparen) out += ')';
            return;
        }
        case NodeKind::Call: {
            out += e->name;
            out += '(';
            for (size_t i = 0; i < e->args.size(); ++i) {
                if (i) out += ", ";
                print_expr(e->args[i], out);
            }
            out += ')';
            return;
        }
    }
}

}  // namespace

std::string print_expression(const ExprPtr& expr) {
    std::string out;
    print_expr(expr, out);
    return out;
}

std::string print_program(const Program& p) {
    std::string out;
    for (const auto& stmt : p.statements) {
        for (size_t i = 0; i < stmt.targets.size(); ++i) {
            if (i) out += ", ";
            out += stmt.targets[i];
        }
        out += " = ";
        for (size_t i = 0; i < stmt.values.size(); ++i) {
            if (i) out += ", ";
            std::string rhs;
            print_expr(stmt.values[i], rhs);
            out += rhs;
        }
        out += '\n';
    }
    return out;
}

}  // namespace finrag::program
