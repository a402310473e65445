#pragma once

/// Expression language for configuration data f(x,u), phi(x,u,nu), u0(x):
/// tokenizer, Pratt parser, evaluator, pretty-printer, and symbolic
/// derivative.  Variables are {x, y, z, u, t} plus the boundary-normal
/// components {nx, ny, nz}; constants are pi and e; calls are exp, log, sin,
/// cos, sqrt, abs, min, max.  Parse and eval report failures as error values
/// with byte offsets, never as exceptions.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sumhess::expr {

enum class Var { x, y, z, u, t, nx, ny, nz };
enum class Const { pi, e };
enum class Func { exp, log, sin, cos, sqrt, abs, min, max };

enum class NodeKind {
    number,
    variable,
    constant,
    neg,
    add,
    sub,
    mul,
    div,
    pow,
    call,
    /// sel_le(a, b, p, q) = p if a <= b else q.  Produced by derivatives of
    /// min/max/abs (left branch at ties); printable but rejected by parse.
    sel_le,
};

struct Ast;
using AstPtr = std::shared_ptr<const Ast>;

/// Immutable after construction; children shared freely.
struct Ast {
    NodeKind kind = NodeKind::number;
    double number = 0.0;
    Var var = Var::x;
    Const cst = Const::pi;
    Func fn = Func::exp;
    std::vector<AstPtr> args;
    std::size_t offset = 0;  // byte offset in source; synthesized nodes inherit
};

struct Error {
    std::size_t offset = 0;
    std::string message;
};

struct ParseResult {
    AstPtr ast;  // null on error
    std::optional<Error> error;
};

[[nodiscard]] ParseResult parse(std::string_view src);

struct Env {
    double x = 0, y = 0, z = 0, u = 0, t = 0;
    double nx = 0, ny = 0, nz = 0;

    [[nodiscard]] double at(Var v) const;
};

struct EvalResult {
    double value = 0.0;
    std::optional<Error> error;  // offset of the offending node; message names it
};

[[nodiscard]] EvalResult eval(const Ast& ast, const Env& env);

/// Symbolic derivative with light constant folding.  min/max/abs use the
/// left-branch-at-ties subgradient convention via sel_le.
[[nodiscard]] AstPtr deriv(const Ast& ast, Var v);

/// Canonical form: no spaces, minimal parentheses, shortest number literals.
/// parse-then-print is the identity on canonical strings.
[[nodiscard]] std::string to_string(const Ast& ast);

[[nodiscard]] bool uses_var(const Ast& ast, Var v);

}  // namespace sumhess::expr
