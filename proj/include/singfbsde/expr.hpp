#pragma once

// Small arithmetic expression language used for coefficient functions in run
// configs. Grammar:
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?            (right associative)
//   atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Variables: t x e y z B. Constants: pi inf. Functions: min max abs exp log
// sqrt sin cos tanh pow indicator(v, lo, hi) (1 on the closed interval).

#include "singfbsde/common.hpp"

#include <cctype>
#include <cstdlib>
#include <string>
#include <string_view>

namespace singfbsde {

enum class Var : std::uint8_t { t = 0, x, e, y, z, B };
inline constexpr std::size_t kVarCount = 6;

struct VarValues {
    std::array<double, kVarCount> v{};
    double& operator[](Var var) { return v[static_cast<std::size_t>(var)]; }
    double operator[](Var var) const { return v[static_cast<std::size_t>(var)]; }
};

class Expr {
public:
    Expr() : source_("0"), code_{Op{OpKind::constant}}, max_depth_(1) {}

    /// Parses `source`; only variables listed in `allowed` may appear.
    static Expr parse(std::string_view source, std::initializer_list<Var> allowed = {Var::t, Var::x, Var::e}) {
        Parser p{source, allowed};
        Expr out;
        out.source_ = std::string(source);
        out.code_.clear();
        out.max_depth_ = 0;
        p.code = &out.code_;
        p.parse_expr();
        p.skip_ws();
        if (p.pos != source.size()) p.fail("unexpected '" + std::string(1, source[p.pos]) + "'");
        out.max_depth_ = p.max_depth;
        if (out.max_depth_ > kStack) p.fail("expression nests too deeply");
        return out;
    }

    double operator()(const VarValues& vars) const {
        std::array<double, kStack> st;
        std::size_t sp = 0;
        for (const Op& op : code_) {
            switch (op.kind) {
                case OpKind::constant: st[sp++] = op.value; break;
                case OpKind::variable: st[sp++] = vars.v[op.arg]; break;
                case OpKind::neg: st[sp - 1] = -st[sp - 1]; break;
                case OpKind::add: --sp; st[sp - 1] += st[sp]; break;
                case OpKind::sub: --sp; st[sp - 1] -= st[sp]; break;
                case OpKind::mul: --sp; st[sp - 1] *= st[sp]; break;
                case OpKind::div: --sp; st[sp - 1] /= st[sp]; break;
                case OpKind::pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
                case OpKind::call: {
                    const std::size_t argc = op.argc;
                    double* a = &st[sp - argc];
                    double r = 0.0;
                    switch (static_cast<Fn>(op.arg)) {
                        case Fn::min: r = a[0]; for (std::size_t i = 1; i < argc; ++i) r = std::min(r, a[i]); break;
                        case Fn::max: r = a[0]; for (std::size_t i = 1; i < argc; ++i) r = std::max(r, a[i]); break;
                        case Fn::abs: r = std::abs(a[0]); break;
                        case Fn::exp: r = std::exp(a[0]); break;
                        case Fn::log: r = std::log(a[0]); break;
                        case Fn::sqrt: r = std::sqrt(a[0]); break;
                        case Fn::sin: r = std::sin(a[0]); break;
                        case Fn::cos: r = std::cos(a[0]); break;
                        case Fn::tanh: r = std::tanh(a[0]); break;
                        case Fn::pow: r = std::pow(a[0], a[1]); break;
                        case Fn::indicator: r = (a[0] >= a[1] && a[0] <= a[2]) ? 1.0 : 0.0; break;
                    }
                    sp -= argc;
                    st[sp++] = r;
                    break;
                }
            }
        }
        return st[0];
    }

    double operator()(double t, double x, double e = 0.0) const {
        VarValues v;
        v[Var::t] = t;
        v[Var::x] = x;
        v[Var::e] = e;
        return (*this)(v);
    }

    bool depends_on(Var var) const {
        return std::any_of(code_.begin(), code_.end(), [var](const Op& op) {
            return op.kind == OpKind::variable && op.arg == static_cast<std::uint8_t>(var);
        });
    }

    bool is_constant() const {
        return std::none_of(code_.begin(), code_.end(), [](const Op& op) { return op.kind == OpKind::variable; });
    }

    const std::string& source() const { return source_; }

private:
    static constexpr std::size_t kStack = 64;

    enum class OpKind : std::uint8_t { constant, variable, neg, add, sub, mul, div, pow, call };
    enum class Fn : std::uint8_t { min, max, abs, exp, log, sqrt, sin, cos, tanh, pow, indicator };

    struct Op {
        OpKind kind;
        std::uint8_t arg = 0;
        std::uint8_t argc = 0;
        double value = 0.0;
    };

    struct Parser {
        std::string_view src;
        std::initializer_list<Var> allowed;
        std::vector<Op>* code = nullptr;
        std::size_t pos = 0;
        std::size_t depth = 0;
        std::size_t max_depth = 0;

        [[noreturn]] void fail(const std::string& what) const {
            throw ConfigError("expression '" + std::string(src) + "': " + what + " at offset " + std::to_string(pos));
        }
        void skip_ws() {
            while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
        }
        bool accept(char c) {
            skip_ws();
            if (pos < src.size() && src[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        void emit(Op op, int stack_delta) {
            code->push_back(op);
            depth = static_cast<std::size_t>(static_cast<long>(depth) + stack_delta);
            max_depth = std::max(max_depth, depth);
        }
        void parse_expr() {
            parse_term();
            for (;;) {
                if (accept('+')) { parse_term(); emit({OpKind::add}, -1); }
                else if (accept('-')) { parse_term(); emit({OpKind::sub}, -1); }
                else return;
            }
        }
        void parse_term() {
            parse_unary();
            for (;;) {
                if (accept('*')) { parse_unary(); emit({OpKind::mul}, -1); }
                else if (accept('/')) { parse_unary(); emit({OpKind::div}, -1); }
                else return;
            }
        }
        void parse_unary() {
            if (accept('-')) {
                parse_unary();
                emit({OpKind::neg}, 0);
                return;
            }
            if (accept('+')) {
                parse_unary();
                return;
            }
            parse_power();
        }
        void parse_power() {
            parse_atom();
            if (accept('^')) {
                parse_unary();
                emit({OpKind::pow}, -1);
            }
        }
        void parse_atom() {
            skip_ws();
            if (pos >= src.size()) fail("unexpected end of input");
            const char c = src[pos];
            if (c == '(') {
                ++pos;
                parse_expr();
                if (!accept(')')) fail("expected ')'");
                return;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                const std::string rest(src.substr(pos));
                char* end = nullptr;
                const double v = std::strtod(rest.c_str(), &end);
                if (end == rest.c_str()) fail("bad number");
                pos += static_cast<std::size_t>(end - rest.c_str());
                emit({OpKind::constant, 0, 0, v}, +1);
                return;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                const std::size_t start = pos;
                while (pos < src.size() &&
                       (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
                    ++pos;
                const std::string name(src.substr(start, pos - start));
                skip_ws();
                if (pos < src.size() && src[pos] == '(') {
                    ++pos;
                    parse_call(name);
                    return;
                }
                parse_name(name);
                return;
            }
            fail("unexpected '" + std::string(1, c) + "'");
        }
        void parse_name(const std::string& name) {
            if (name == "pi") return emit({OpKind::constant, 0, 0, 3.14159265358979323846}, +1);
            if (name == "inf") return emit({OpKind::constant, 0, 0, kInf}, +1);
            static constexpr std::array<std::pair<std::string_view, Var>, kVarCount> vars{{
                {"t", Var::t}, {"x", Var::x}, {"e", Var::e}, {"y", Var::y}, {"z", Var::z}, {"B", Var::B}}};
            for (const auto& [n, v] : vars) {
                if (name == n) {
                    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
                        fail("variable '" + name + "' not allowed here");
                    return emit({OpKind::variable, static_cast<std::uint8_t>(v)}, +1);
                }
            }
            fail("unknown name '" + name + "'");
        }
        void parse_call(const std::string& name) {
            struct Entry { std::string_view name; Fn fn; int min_args; int max_args; };
            static constexpr std::array<Entry, 11> table{{
                {"min", Fn::min, 2, 16}, {"max", Fn::max, 2, 16}, {"abs", Fn::abs, 1, 1},
                {"exp", Fn::exp, 1, 1}, {"log", Fn::log, 1, 1}, {"sqrt", Fn::sqrt, 1, 1},
                {"sin", Fn::sin, 1, 1}, {"cos", Fn::cos, 1, 1}, {"tanh", Fn::tanh, 1, 1},
                {"pow", Fn::pow, 2, 2}, {"indicator", Fn::indicator, 3, 3}}};
            const auto it = std::find_if(table.begin(), table.end(), [&](const Entry& e) { return e.name == name; });
            if (it == table.end()) fail("unknown function '" + name + "'");
            int argc = 0;
            if (!accept(')')) {
                do {
                    parse_expr();
                    ++argc;
                } while (accept(','));
                if (!accept(')')) fail("expected ')' after arguments of " + name);
            }
            if (argc < it->min_args || argc > it->max_args) fail("wrong number of arguments to " + name);
            emit({OpKind::call, static_cast<std::uint8_t>(it->fn), static_cast<std::uint8_t>(argc)}, 1 - argc);
        }
    };

    std::string source_;
    std::vector<Op> code_;
    std::size_t max_depth_ = 0;
};

}  // namespace singfbsde
