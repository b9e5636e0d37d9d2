#pragma once

#include <functional>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace finrag::program {

enum class ErrorKind {
    Syntax,
    ReadBeforeAssign,
    MissingResult,
    DisallowedCall,
    BadArity,
    DivisionByZero,
    DomainError,
    Timeout,
    RangeViolation,
};

enum class Stage { Parse, StaticCheck, Execute, RuntimeVerify };

std::string to_string(ErrorKind k);
std::string to_string(Stage s);

class ProgramError : public std::runtime_error {
public:
    ProgramError(ErrorKind kind, Stage stage, std::string message, int line = 0, int column = 0);
    ErrorKind kind() const { return kind_; }
    Stage stage() const { return stage_; }
    int line() const { return line_; }
    int column() const { return column_; }

private:
    ErrorKind kind_;
    Stage stage_;
    int line_;
    int column_;
};

enum class NodeKind { Number, Ident, Neg, Binary, Call };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    NodeKind kind = NodeKind::Number;
    double number = 0.0;              // Number
    std::string name;                 // Ident / Call callee
    BinaryOp op = BinaryOp::Add;      // Binary
    std::vector<ExprPtr> args;        // Neg (1), Binary (2), Call (n)
    int line = 0;
    int column = 0;

    static ExprPtr make_number(double v, int line = 0, int col = 0);
    static ExprPtr make_ident(std::string name, int line = 0, int col = 0);
    static ExprPtr make_neg(ExprPtr inner, int line = 0, int col = 0);
    static ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, int line = 0, int col = 0);
    static ExprPtr make_call(std::string callee, std::vector<ExprPtr> args, int line = 0,
                             int col = 0);
};

/// One assignment line; tuple assignment carries parallel targets/values.
struct Statement {
    std::vector<std::string> targets;
    std::vector<ExprPtr> values;  // same length as targets
    int line = 0;
};

struct Program {
    std::vector<Statement> statements;
    std::string source;
};

const std::set<std::string>& default_allowlist();  // round, abs, min, max

/// Parses the restricted straight-line language:
///   lines of `target[, target...] = expr[, expr...]`, `#` comments,
///   expressions over numbers, identifiers, + - * / **, parentheses and
///   calls. Rejects syntax errors (with line/column), reads of unassigned
///   identifiers, and programs whose final statement does not assign
///   `result`.
Program parse_program(const std::string& text);

/// Parses a single expression with no variables; used by the numeric
/// verifier for chain-of-thought arithmetic claims.
ExprPtr parse_arithmetic_expression(const std::string& text);

struct Violation {
    ErrorKind kind;
    std::string message;
    int line = 0;
    int column = 0;
};

/// Call-allowlist and arity validation. Violations are data, not exceptions.
std::vector<Violation> static_check(const Program& p,
                                    const std::set<std::string>& allowlist = default_allowlist());

/// Evaluates statements in order under real arithmetic and returns the value
/// bound to `result`. Division by zero, non-real results and deadline
/// overruns raise ProgramError. The deadline is honored even though the
/// grammar admits no loops.
double execute_program(const Program& p, int timeout_ms = 5000,
                       std::function<double()> elapsed_ms = nullptr);

double evaluate_expression(const ExprPtr& expr);

/// Runtime verification for PoT results: value must be finite and within
/// [-bound, bound]. Throws ProgramError{RangeViolation} otherwise.
void verify_runtime_value(double value, double bound);

/// Range bound derived from context: 1e6 times the largest absolute numeric
/// literal appearing in the evidence, with a floor of 1e6.
double range_bound_from_evidence(const std::vector<std::string>& evidence);

/// Deterministic source form of a program (used by traces and tests).
std::string print_program(const Program& p);
std::string print_expression(const ExprPtr& expr);

}  // namespace finrag::program
