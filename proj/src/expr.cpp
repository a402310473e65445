#include "sumhess/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstddef>

#include "sumhess/format.hpp"

namespace sumhess::expr {

namespace {

// ---------------------------------------------------------------- tokens --

enum class Tok { number, ident, plus, minus, star, slash, caret, lparen, rparen, comma, end };

struct Token {
    Tok kind = Tok::end;
    std::size_t offset = 0;
    std::string_view text;
    double value = 0.0;  // number tokens
};

struct TokenStream {
    std::vector<Token> tokens;
    std::optional<Error> error;
};

[[nodiscard]] bool ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

[[nodiscard]] bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

[[nodiscard]] TokenStream tokenize(std::string_view src) {
    TokenStream out;
    std::size_t i = 0;
    while (i < src.size()) {
        const char c = src[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
            continue;
        }
        Token tok;
        tok.offset = i;
        if (c >= '0' && c <= '9') {
            double value = 0.0;
            const auto res = std::from_chars(src.data() + i, src.data() + src.size(), value);
            if (res.ec != std::errc{}) {
                out.error = Error{i, "malformed number literal"};
                return out;
            }
            tok.kind = Tok::number;
            tok.value = value;
            tok.text = src.substr(i, static_cast<std::size_t>(res.ptr - (src.data() + i)));
            i += tok.text.size();
        } else if (ident_start(c)) {
            std::size_t j = i + 1;
            while (j < src.size() && ident_char(src[j])) ++j;
            tok.kind = Tok::ident;
            tok.text = src.substr(i, j - i);
            i = j;
        } else {
            switch (c) {
                case '+': tok.kind = Tok::plus; break;
                case '-': tok.kind = Tok::minus; break;
                case '*': tok.kind = Tok::star; break;
                case '/': tok.kind = Tok::slash; break;
                case '^': tok.kind = Tok::caret; break;
                case '(': tok.kind = Tok::lparen; break;
                case ')': tok.kind = Tok::rparen; break;
                case ',': tok.kind = Tok::comma; break;
                default:
                    out.error = Error{i, std::string("unexpected character '") + c + "'"};
                    return out;
            }
            tok.text = src.substr(i, 1);
            ++i;
        }
        out.tokens.push_back(tok);
    }
    out.tokens.push_back(Token{Tok::end, src.size(), {}, 0.0});
    return out;
}

// ----------------------------------------------------------- node makers --

[[nodiscard]] AstPtr make_number(double v, std::size_t offset = 0) {
    auto n = std::make_shared<Ast>();
    n->kind = NodeKind::number;
    n->number = v;
    n->offset = offset;
    return n;
}

[[nodiscard]] AstPtr make_var(Var v, std::size_t offset = 0) {
    auto n = std::make_shared<Ast>();
    n->kind = NodeKind::variable;
    n->var = v;
    n->offset = offset;
    return n;
}

[[nodiscard]] AstPtr make_const(Const c, std::size_t offset = 0) {
    auto n = std::make_shared<Ast>();
    n->kind = NodeKind::constant;
    n->cst = c;
    n->offset = offset;
    return n;
}

[[nodiscard]] AstPtr make_node(NodeKind kind, std::vector<AstPtr> args, std::size_t offset = 0) {
    auto n = std::make_shared<Ast>();
    n->kind = kind;
    n->args = std::move(args);
    n->offset = offset;
    return n;
}

[[nodiscard]] AstPtr make_call(Func fn, std::vector<AstPtr> args, std::size_t offset = 0) {
    auto n = std::make_shared<Ast>();
    n->kind = NodeKind::call;
    n->fn = fn;
    n->args = std::move(args);
    n->offset = offset;
    return n;
}

[[nodiscard]] bool is_number(const AstPtr& a, double v) {
    return a->kind == NodeKind::number && a->number == v;
}

// Folding builders keep derivative trees small.
[[nodiscard]] AstPtr fold_neg(AstPtr a) {
    if (a->kind == NodeKind::number) return make_number(-a->number, a->offset);
    const std::size_t off = a->offset;
    return make_node(NodeKind::neg, {std::move(a)}, off);
}

[[nodiscard]] AstPtr fold_add(AstPtr a, AstPtr b) {
    if (is_number(a, 0.0)) return b;
    if (is_number(b, 0.0)) return a;
    if (a->kind == NodeKind::number && b->kind == NodeKind::number)
        return make_number(a->number + b->number, a->offset);
    const std::size_t off = a->offset;
    return make_node(NodeKind::add, {std::move(a), std::move(b)}, off);
}

[[nodiscard]] AstPtr fold_sub(AstPtr a, AstPtr b) {
    if (is_number(b, 0.0)) return a;
    if (is_number(a, 0.0)) return fold_neg(std::move(b));
    if (a->kind == NodeKind::number && b->kind == NodeKind::number)
        return make_number(a->number - b->number, a->offset);
    const std::size_t off = a->offset;
    return make_node(NodeKind::sub, {std::move(a), std::move(b)}, off);
}

[[nodiscard]] AstPtr fold_mul(AstPtr a, AstPtr b) {
    if (is_number(a, 0.0) || is_number(b, 0.0)) return make_number(0.0, a->offset);
    if (is_number(a, 1.0)) return b;
    if (is_number(b, 1.0)) return a;
    if (a->kind == NodeKind::number && b->kind == NodeKind::number)
        return make_number(a->number * b->number, a->offset);
    const std::size_t off = a->offset;
    return make_node(NodeKind::mul, {std::move(a), std::move(b)}, off);
}

[[nodiscard]] AstPtr fold_div(AstPtr a, AstPtr b) {
    if (is_number(a, 0.0)) return a;
    if (is_number(b, 1.0)) return a;
    const std::size_t off = a->offset;
    return make_node(NodeKind::div, {std::move(a), std::move(b)}, off);
}

[[nodiscard]] AstPtr fold_pow(AstPtr a, AstPtr b) {
    if (is_number(b, 1.0)) return a;
    if (is_number(b, 0.0)) return make_number(1.0, a->offset);
    const std::size_t off = a->offset;
    return make_node(NodeKind::pow, {std::move(a), std::move(b)}, off);
}

// ---------------------------------------------------------------- parser --

struct NameTables {
    [[nodiscard]] static std::optional<Var> var_of(std::string_view s) {
        if (s == "x") return Var::x;
        if (s == "y") return Var::y;
        if (s == "z") return Var::z;
        if (s == "u") return Var::u;
        if (s == "t") return Var::t;
        if (s == "nx") return Var::nx;
        if (s == "ny") return Var::ny;
        if (s == "nz") return Var::nz;
        return std::nullopt;
    }
    [[nodiscard]] static std::optional<Const> const_of(std::string_view s) {
        if (s == "pi") return Const::pi;
        if (s == "e") return Const::e;
        return std::nullopt;
    }
    [[nodiscard]] static std::optional<Func> func_of(std::string_view s) {
        if (s == "exp") return Func::exp;
        if (s == "log") return Func::log;
        if (s == "sin") return Func::sin;
        if (s == "cos") return Func::cos;
        if (s == "sqrt") return Func::sqrt;
        if (s == "abs") return Func::abs;
        if (s == "min") return Func::min;
        if (s == "max") return Func::max;
        return std::nullopt;
    }
    [[nodiscard]] static int arity(Func f) {
        return (f == Func::min || f == Func::max) ? 2 : 1;
    }
};

struct Parser {
    const std::vector<Token>& toks;
    std::size_t pos = 0;
    std::optional<Error> err = std::nullopt;

    [[nodiscard]] const Token& peek() const { return toks[pos]; }
    const Token& advance() { return toks[pos++]; }

    AstPtr fail(std::size_t offset, std::string message) {
        if (!err) err = Error{offset, std::move(message)};
        return nullptr;
    }

    AstPtr parse_prefix() {
        const Token& tok = advance();
        switch (tok.kind) {
            case Tok::number: return make_number(tok.value, tok.offset);
            case Tok::minus: {
                AstPtr operand = parse_expr(25);
                if (!operand) return nullptr;
                return make_node(NodeKind::neg, {std::move(operand)}, tok.offset);
            }
            case Tok::lparen: {
                AstPtr inner = parse_expr(0);
                if (!inner) return nullptr;
                if (peek().kind != Tok::rparen)
                    return fail(peek().offset, "expected ')'");
                advance();
                return inner;
            }
            case Tok::ident: return parse_ident(tok);
            default: return fail(tok.offset, "expected a value");
        }
    }

    AstPtr parse_ident(const Token& tok) {
        if (const auto fn = NameTables::func_of(tok.text)) {
            if (peek().kind != Tok::lparen)
                return fail(peek().offset, "expected '(' after function name");
            advance();
            std::vector<AstPtr> args;
            while (true) {
                AstPtr arg = parse_expr(0);
                if (!arg) return nullptr;
                args.push_back(std::move(arg));
                if (peek().kind == Tok::comma) {
                    advance();
                    continue;
                }
                if (peek().kind == Tok::rparen) {
                    advance();
                    break;
                }
                return fail(peek().offset, "expected ',' or ')' in argument list");
            }
            if (static_cast<int>(args.size()) != NameTables::arity(*fn)) {
                return fail(tok.offset, std::string(tok.text) + " expects " +
                                            std::to_string(NameTables::arity(*fn)) +
                                            " argument(s)");
            }
            return make_call(*fn, std::move(args), tok.offset);
        }
        if (const auto v = NameTables::var_of(tok.text)) return make_var(*v, tok.offset);
        if (const auto c = NameTables::const_of(tok.text)) return make_const(*c, tok.offset);
        if (tok.text == "sel_le")
            return fail(tok.offset, "sel_le is internal and cannot appear in source");
        return fail(tok.offset, "unknown identifier '" + std::string(tok.text) + "'");
    }

    AstPtr parse_expr(int min_bp) {
        AstPtr lhs = parse_prefix();
        if (!lhs) return nullptr;
        while (true) {
            const Token& op = peek();
            int lbp = 0, rbp = 0;
            NodeKind kind = NodeKind::add;
            switch (op.kind) {
                case Tok::plus: lbp = 10; rbp = 11; kind = NodeKind::add; break;
                case Tok::minus: lbp = 10; rbp = 11; kind = NodeKind::sub; break;
                case Tok::star: lbp = 20; rbp = 21; kind = NodeKind::mul; break;
                case Tok::slash: lbp = 20; rbp = 21; kind = NodeKind::div; break;
                case Tok::caret: lbp = 30; rbp = 29; kind = NodeKind::pow; break;
                default: return lhs;
            }
            if (lbp <= min_bp) return lhs;
            advance();
            AstPtr rhs = parse_expr(rbp);
            if (!rhs) return nullptr;
            lhs = make_node(kind, {std::move(lhs), std::move(rhs)}, op.offset);
        }
    }
};

// --------------------------------------------------------------- printer --

[[nodiscard]] int precedence(const Ast& a) {
    switch (a.kind) {
        case NodeKind::add:
        case NodeKind::sub: return 1;
        case NodeKind::mul:
        case NodeKind::div: return 2;
        case NodeKind::neg: return 3;
        case NodeKind::pow: return 4;
        case NodeKind::number: return a.number < 0 ? 3 : 5;
        default: return 5;
    }
}

[[nodiscard]] std::string_view func_name(Func f) {
    switch (f) {
        case Func::exp: return "exp";
        case Func::log: return "log";
        case Func::sin: return "sin";
        case Func::cos: return "cos";
        case Func::sqrt: return "sqrt";
        case Func::abs: return "abs";
        case Func::min: return "min";
        case Func::max: return "max";
    }
    return "";
}

[[nodiscard]] std::string_view var_name(Var v) {
    switch (v) {
        case Var::x: return "x";
        case Var::y: return "y";
        case Var::z: return "z";
        case Var::u: return "u";
        case Var::t: return "t";
        case Var::nx: return "nx";
        case Var::ny: return "ny";
        case Var::nz: return "nz";
    }
    return "";
}

void render(const Ast& a, int min_prec, std::string& out) {
    const bool parens = precedence(a) < min_prec;
    if (parens) out += '(';
    switch (a.kind) {
        case NodeKind::number: out += format_double(a.number); break;
        case NodeKind::variable: out += var_name(a.var); break;
        case NodeKind::constant: out += a.cst == Const::pi ? "pi" : "e"; break;
        case NodeKind::neg:
            out += '-';
            render(*a.args[0], 4, out);
            break;
        case NodeKind::add:
        case NodeKind::sub:
            render(*a.args[0], 1, out);
            out += a.kind == NodeKind::add ? '+' : '-';
            render(*a.args[1], 2, out);
            break;
        case NodeKind::mul:
        case NodeKind::div:
            render(*a.args[0], 2, out);
            out += a.kind == NodeKind::mul ? '*' : '/';
            render(*a.args[1], 3, out);
            break;
        case NodeKind::pow:
            render(*a.args[0], 5, out);
            out += '^';
            render(*a.args[1], 4, out);
            break;
        case NodeKind::call:
        case NodeKind::sel_le:
            out += a.kind == NodeKind::call ? std::string(func_name(a.fn)) : "sel_le";
            out += '(';
            for (std::size_t i = 0; i < a.args.size(); ++i) {
                if (i > 0) out += ',';
                render(*a.args[i], 0, out);
            }
            out += ')';
            break;
    }
    if (parens) out += ')';
}

}  // namespace

// ------------------------------------------------------------ public API --

ParseResult parse(std::string_view src) {
    TokenStream ts = tokenize(src);
    if (ts.error) return {nullptr, ts.error};
    Parser p{ts.tokens};
    AstPtr ast = p.parse_expr(0);
    if (!ast) return {nullptr, p.err};
    if (p.peek().kind != Tok::end)
        return {nullptr, Error{p.peek().offset, "unexpected token after expression"}};
    return {std::move(ast), std::nullopt};
}

double Env::at(Var v) const {
    switch (v) {
        case Var::x: return x;
        case Var::y: return y;
        case Var::z: return z;
        case Var::u: return u;
        case Var::t: return t;
        case Var::nx: return nx;
        case Var::ny: return ny;
        case Var::nz: return nz;
    }
    return 0.0;
}

EvalResult eval(const Ast& ast, const Env& env) {
    switch (ast.kind) {
        case NodeKind::number: return {ast.number, std::nullopt};
        case NodeKind::variable: return {env.at(ast.var), std::nullopt};
        case NodeKind::constant:
            return {ast.cst == Const::pi ? std::acos(-1.0) : std::exp(1.0), std::nullopt};
        case NodeKind::neg: {
            auto a = eval(*ast.args[0], env);
            if (a.error) return a;
            return {-a.value, std::nullopt};
        }
        case NodeKind::add:
        case NodeKind::sub:
        case NodeKind::mul:
        case NodeKind::div:
        case NodeKind::pow: {
            auto a = eval(*ast.args[0], env);
            if (a.error) return a;
            auto b = eval(*ast.args[1], env);
            if (b.error) return b;
            switch (ast.kind) {
                case NodeKind::add: return {a.value + b.value, std::nullopt};
                case NodeKind::sub: return {a.value - b.value, std::nullopt};
                case NodeKind::mul: return {a.value * b.value, std::nullopt};
                case NodeKind::div: return {a.value / b.value, std::nullopt};
                default: return {std::pow(a.value, b.value), std::nullopt};
            }
        }
        case NodeKind::call: {
            auto a = eval(*ast.args[0], env);
            if (a.error) return a;
            switch (ast.fn) {
                case Func::exp: return {std::exp(a.value), std::nullopt};
                case Func::log:
                    if (a.value < 0.0)
                        return {0.0, Error{ast.offset, "log of a negative argument in '" +
                                                           to_string(ast) + "'"}};
                    return {std::log(a.value), std::nullopt};
                case Func::sin: return {std::sin(a.value), std::nullopt};
                case Func::cos: return {std::cos(a.value), std::nullopt};
                case Func::sqrt:
                    if (a.value < 0.0)
                        return {0.0, Error{ast.offset, "sqrt of a negative argument in '" +
                                                           to_string(ast) + "'"}};
                    return {std::sqrt(a.value), std::nullopt};
                case Func::abs: return {std::abs(a.value), std::nullopt};
                case Func::min:
                case Func::max: {
                    auto b = eval(*ast.args[1], env);
                    if (b.error) return b;
                    return {ast.fn == Func::min ? std::min(a.value, b.value)
                                                : std::max(a.value, b.value),
                            std::nullopt};
                }
            }
            return {0.0, Error{ast.offset, "unreachable"}};
        }
        case NodeKind::sel_le: {
            auto a = eval(*ast.args[0], env);
            if (a.error) return a;
            auto b = eval(*ast.args[1], env);
            if (b.error) return b;
            // Only the selected branch is evaluated.
            return eval(a.value <= b.value ? *ast.args[2] : *ast.args[3], env);
        }
    }
    return {0.0, Error{ast.offset, "unreachable"}};
}

AstPtr deriv(const Ast& ast, Var v) {
    switch (ast.kind) {
        case NodeKind::number:
        case NodeKind::constant: return make_number(0.0, ast.offset);
        case NodeKind::variable:
            return make_number(ast.var == v ? 1.0 : 0.0, ast.offset);
        case NodeKind::neg: return fold_neg(deriv(*ast.args[0], v));
        case NodeKind::add: return fold_add(deriv(*ast.args[0], v), deriv(*ast.args[1], v));
        case NodeKind::sub: return fold_sub(deriv(*ast.args[0], v), deriv(*ast.args[1], v));
        case NodeKind::mul: {
            const AstPtr& a = ast.args[0];
            const AstPtr& b = ast.args[1];
            return fold_add(fold_mul(deriv(*a, v), b), fold_mul(a, deriv(*b, v)));
        }
        case NodeKind::div: {
            const AstPtr& a = ast.args[0];
            const AstPtr& b = ast.args[1];
            return fold_div(fold_sub(fold_mul(deriv(*a, v), b), fold_mul(a, deriv(*b, v))),
                            fold_mul(b, b));
        }
        case NodeKind::pow: {
            const AstPtr& a = ast.args[0];
            const AstPtr& b = ast.args[1];
            const AstPtr da = deriv(*a, v);
            const AstPtr db = deriv(*b, v);
            if (b->kind == NodeKind::number) {
                // c * a^(c-1) * da
                return fold_mul(
                    fold_mul(make_number(b->number, b->offset),
                             fold_pow(a, make_number(b->number - 1.0, b->offset))),
                    da);
            }
            // a^b * (db*log(a) + b*da/a)
            return fold_mul(fold_pow(a, b),
                            fold_add(fold_mul(db, make_call(Func::log, {a}, ast.offset)),
                                     fold_div(fold_mul(b, da), a)));
        }
        case NodeKind::call: {
            const AstPtr& a = ast.args[0];
            const AstPtr da = deriv(*a, v);
            switch (ast.fn) {
                case Func::exp: return fold_mul(make_call(Func::exp, {a}, ast.offset), da);
                case Func::log: return fold_div(da, a);
                case Func::sin: return fold_mul(make_call(Func::cos, {a}, ast.offset), da);
                case Func::cos:
                    return fold_neg(fold_mul(make_call(Func::sin, {a}, ast.offset), da));
                case Func::sqrt:
                    return fold_div(da, fold_mul(make_number(2.0, ast.offset),
                                                 make_call(Func::sqrt, {a}, ast.offset)));
                case Func::abs:
                    // |a| = max(a, -a): left branch at the tie a = 0 gives +da.
                    return make_node(NodeKind::sel_le, {fold_neg(a), a, da, fold_neg(da)},
                                     ast.offset);
                case Func::min:
                case Func::max: {
                    const AstPtr& b = ast.args[1];
                    const AstPtr db = deriv(*b, v);
                    if (ast.fn == Func::min)
                        return make_node(NodeKind::sel_le, {a, b, da, db}, ast.offset);
                    return make_node(NodeKind::sel_le, {b, a, da, db}, ast.offset);
                }
            }
            return make_number(0.0, ast.offset);
        }
        case NodeKind::sel_le:
            return make_node(NodeKind::sel_le,
                             {ast.args[0], ast.args[1], deriv(*ast.args[2], v),
                              deriv(*ast.args[3], v)},
                             ast.offset);
    }
    return make_number(0.0, ast.offset);
}

std::string to_string(const Ast& ast) {
    std::string out;
    render(ast, 0, out);
    return out;
}

bool uses_var(const Ast& ast, Var v) {
    if (ast.kind == NodeKind::variable) return ast.var == v;
    for (const auto& child : ast.args) {
        if (uses_var(*child, v)) return true;
    }
    return false;
}

}  // namespace sumhess::expr
