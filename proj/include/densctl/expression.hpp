#pragma once

// A small expression language for user-supplied fields (phi, q, sigma, p_inf).
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?          right associative, binds tighter than unary minus
//   primary := number | 'x'k | 'pi' | func '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: exp log sqrt sin cos tanh abs (unary), min max (binary).

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "densctl/error.hpp"

namespace densctl {

enum class Func { exp, log, sqrt, sin, cos, tanh, abs, min, max };

inline const char* func_name(Func f) {
  switch (f) {
    case Func::exp: return "exp";
    case Func::log: return "log";
    case Func::sqrt: return "sqrt";
    case Func::sin: return "sin";
    case Func::cos: return "cos";
    case Func::tanh: return "tanh";
    case Func::abs: return "abs";
    case Func::min: return "min";
    case Func::max: return "max";
  }
  return "?";
}

inline int func_arity(Func f) { return (f == Func::min || f == Func::max) ? 2 : 1; }

struct ExprNode {
  enum class Kind { number, variable, negate, add, sub, mul, div, pow, call };

  Kind kind = Kind::number;
  double value = 0.0;  // number
  int variable = 0;    // 0-based index for x1, x2, ...
  Func func = Func::exp;
  std::vector<ExprNode> children;

  friend bool operator==(const ExprNode&, const ExprNode&) = default;
};

class Expression {
 public:
  Expression() : root_(std::make_shared<ExprNode>()) {}
  explicit Expression(ExprNode root) : root_(std::make_shared<const ExprNode>(std::move(root))) {}

  const ExprNode& root() const { return *root_; }

  /// Number of variables needed to evaluate (largest k with xk referenced).
  int arity() const { return arity_of(*root_); }

  bool is_constant() const { return arity() == 0; }

  double evaluate(std::span<const double> x) const { return eval(*root_, x); }

  /// Canonical, fully parenthesised text; parse(to_string()) reproduces the tree.
  std::string to_string() const {
    std::string out;
    print(*root_, out);
    return out;
  }

  friend bool operator==(const Expression& a, const Expression& b) { return *a.root_ == *b.root_; }

 private:
  static int arity_of(const ExprNode& n) {
    int a = n.kind == ExprNode::Kind::variable ? n.variable + 1 : 0;
    for (const ExprNode& c : n.children) a = std::max(a, arity_of(c));
    return a;
  }

  static double eval(const ExprNode& n, std::span<const double> x) {
    using K = ExprNode::Kind;
    switch (n.kind) {
      case K::number: return n.value;
      case K::variable: return x[static_cast<std::size_t>(n.variable)];
      case K::negate: return -eval(n.children[0], x);
      case K::add: return eval(n.children[0], x) + eval(n.children[1], x);
      case K::sub: return eval(n.children[0], x) - eval(n.children[1], x);
      case K::mul: return eval(n.children[0], x) * eval(n.children[1], x);
      case K::div: return eval(n.children[0], x) / eval(n.children[1], x);
      case K::pow: {
        const double b = eval(n.children[0], x);
        const double e = eval(n.children[1], x);
        if (e == 2.0) return b * b;
        return std::pow(b, e);
      }
      case K::call: {
        const double a = eval(n.children[0], x);
        switch (n.func) {
          case Func::exp: return std::exp(a);
          case Func::log: return std::log(a);
          case Func::sqrt: return std::sqrt(a);
          case Func::sin: return std::sin(a);
          case Func::cos: return std::cos(a);
          case Func::tanh: return std::tanh(a);
          case Func::abs: return std::abs(a);
          case Func::min: return std::min(a, eval(n.children[1], x));
          case Func::max: return std::max(a, eval(n.children[1], x));
        }
      }
    }
    return 0.0;
  }

  static void print(const ExprNode& n, std::string& out) {
    using K = ExprNode::Kind;
    switch (n.kind) {
      case K::number: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", n.value);
        out += buf;
        return;
      }
      case K::variable: out += "x" + std::to_string(n.variable + 1); return;
      case K::negate:
        out += "(-";
        print(n.children[0], out);
        out += ")";
        return;
      case K::call:
        out += func_name(n.func);
        out += "(";
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          print(n.children[i], out);
        }
        out += ")";
        return;
      default: break;
    }
    const char* op = n.kind == K::add ? " + " : n.kind == K::sub ? " - " : n.kind == K::mul ? " * " : n.kind == K::div ? " / " : " ^ ";
    out += "(";
    print(n.children[0], out);
    out += op;
    print(n.children[1], out);
    out += ")";
  }

  std::shared_ptr<const ExprNode> root_;
};

namespace detail {

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  ExprNode parse() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    ExprNode n = expr();
    skip_space();
    if (pos_ != text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return n;
  }

 private:
  using K = ExprNode::Kind;

  static ExprNode binary(K kind, ExprNode a, ExprNode b) {
    ExprNode n;
    n.kind = kind;
    n.children.push_back(std::move(a));
    n.children.push_back(std::move(b));
    return n;
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  ExprNode expr() {
    ExprNode lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(K::add, std::move(lhs), term());
      } else if (accept('-')) {
        lhs = binary(K::sub, std::move(lhs), term());
      } else {
        return lhs;
      }
    }
  }

  ExprNode term() {
    ExprNode lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = binary(K::mul, std::move(lhs), unary());
      } else if (accept('/')) {
        lhs = binary(K::div, std::move(lhs), unary());
      } else {
        return lhs;
      }
    }
  }

  ExprNode unary() {
    if (accept('-')) {
      ExprNode n;
      n.kind = K::negate;
      n.children.push_back(unary());
      return n;
    }
    if (accept('+')) return unary();
    return power();
  }

  ExprNode power() {
    ExprNode base = primary();
    if (accept('^')) return binary(K::pow, std::move(base), unary());
    return base;
  }

  ExprNode primary() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      ExprNode n = expr();
      expect(')');
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  ExprNode number() {
    const std::size_t start = pos_;
    double v = 0.0;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    const auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::general);
    if (ec != std::errc() || ptr == first) throw ParseError("malformed number", start);
    pos_ += static_cast<std::size_t>(ptr - first);
    ExprNode n;
    n.kind = K::number;
    n.value = v;
    return n;
  }

  ExprNode identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);

    if (name.size() >= 2 && name[0] == 'x') {
      int k = 0;
      const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
      if (ec == std::errc() && ptr == name.data() + name.size() && k >= 1) {
        ExprNode n;
        n.kind = K::variable;
        n.variable = k - 1;
        return n;
      }
    }
    if (name == "pi") {
      ExprNode n;
      n.kind = K::number;
      n.value = 3.14159265358979323846;
      return n;
    }
    static constexpr Func kFuncs[] = {Func::exp, Func::log, Func::sqrt, Func::sin, Func::cos,
                                      Func::tanh, Func::abs, Func::min, Func::max};
    for (Func f : kFuncs) {
      if (name == func_name(f)) {
        ExprNode n;
        n.kind = K::call;
        n.func = f;
        expect('(');
        n.children.push_back(expr());
        while (accept(',')) n.children.push_back(expr());
        if (static_cast<int>(n.children.size()) != func_arity(f)) {
          throw ParseError(std::string(func_name(f)) + " takes " + std::to_string(func_arity(f)) + " argument(s)", start);
        }
        expect(')');
        return n;
      }
    }
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expression parse_expression(std::string_view text) {
  return Expression(detail::ExpressionParser(text).parse());
}

}  // namespace densctl
