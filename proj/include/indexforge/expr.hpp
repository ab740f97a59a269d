#pragma once

#include <boost/rational.hpp>

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "indexforge/error.hpp"
#include "indexforge/token.hpp"

namespace indexforge {

enum class Op : std::uint8_t { Channel, Add, Sub, Mul, Div, Square, Sqrt };

constexpr bool is_binary(Op op) noexcept { return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div; }
constexpr bool is_unary(Op op) noexcept { return op == Op::Square || op == Op::Sqrt; }

/// Immutable expression syntax tree. Copies share structure.
class ExprTree {
public:
    static ExprTree channel(std::uint32_t index) { return ExprTree(make(Op::Channel, index, {}, {})); }

    static ExprTree binary(Op op, ExprTree lhs, ExprTree rhs) {
        if (!is_binary(op)) throw ContractError("binary() needs a binary operator");
        return ExprTree(make(op, 0, std::move(lhs.node_), std::move(rhs.node_)));
    }

    static ExprTree unary(Op op, ExprTree child) {
        if (!is_unary(op)) throw ContractError("unary() needs a unary operator");
        return ExprTree(make(op, 0, std::move(child.node_), {}));
    }

    Op op() const noexcept { return node_->op; }
    std::uint32_t channel_index() const noexcept { return node_->channel; }
    bool is_channel() const noexcept { return node_->op == Op::Channel; }

    /// Left operand of a binary node, or the operand of a unary node.
    ExprTree lhs() const { return ExprTree(node_->lhs); }
    ExprTree rhs() const { return ExprTree(node_->rhs); }
    ExprTree child() const { return ExprTree(node_->lhs); }

    /// Distinct channel indices appearing in the tree, ascending.
    std::set<std::uint32_t> channels() const {
        std::set<std::uint32_t> out;
        collect_channels(*node_, out);
        return out;
    }

    std::size_t node_count() const noexcept { return count(*node_); }

    friend bool operator==(const ExprTree& a, const ExprTree& b) noexcept { return equal(*a.node_, *b.node_); }

private:
    struct Node {
        Op op;
        std::uint32_t channel;
        std::shared_ptr<const Node> lhs;
        std::shared_ptr<const Node> rhs;
    };

    explicit ExprTree(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

    static std::shared_ptr<const Node> make(Op op, std::uint32_t ch, std::shared_ptr<const Node> l,
                                            std::shared_ptr<const Node> r) {
        return std::make_shared<const Node>(Node{op, ch, std::move(l), std::move(r)});
    }

    static void collect_channels(const Node& n, std::set<std::uint32_t>& out) {
        if (n.op == Op::Channel) {
            out.insert(n.channel);
            return;
        }
        if (n.lhs) collect_channels(*n.lhs, out);
        if (n.rhs) collect_channels(*n.rhs, out);
    }

    static std::size_t count(const Node& n) noexcept {
        return 1 + (n.lhs ? count(*n.lhs) : 0) + (n.rhs ? count(*n.rhs) : 0);
    }

    static bool equal(const Node& a, const Node& b) noexcept {
        if (a.op != b.op) return false;
        if (a.op == Op::Channel) return a.channel == b.channel;
        if (!equal(*a.lhs, *b.lhs)) return false;
        return !a.rhs || equal(*a.rhs, *b.rhs);
    }

    std::shared_ptr<const Node> node_;
};

namespace detail {

// Recursive descent over in-order tokens:
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := unary atom | atom
//   atom   := channel | '(' expr ')'      with at least two tokens inside
class Parser {
public:
    explicit Parser(std::span<const Token> tokens) : tokens_(tokens) {}

    ExprTree parse_all() {
        ExprTree tree = expr();
        if (pos_ >= tokens_.size()) throw ParseError(pos_, "missing '='");
        if (peek().kind != TokenKind::End) throw ParseError(pos_, "unexpected '" + spelling(peek()) + "'");
        if (pos_ + 1 != tokens_.size()) throw ParseError(pos_ + 1, "tokens after '='");
        return tree;
    }

private:
    Token peek() const { return tokens_[pos_]; }
    bool at(TokenKind k) const { return pos_ < tokens_.size() && tokens_[pos_].kind == k; }

    ExprTree expr() {
        ExprTree lhs = term();
        while (at(TokenKind::Plus) || at(TokenKind::Minus)) {
            const Op op = peek().kind == TokenKind::Plus ? Op::Add : Op::Sub;
            ++pos_;
            lhs = ExprTree::binary(op, lhs, term());
        }
        return lhs;
    }

    ExprTree term() {
        ExprTree lhs = factor();
        while (at(TokenKind::Mul) || at(TokenKind::Div)) {
            const Op op = peek().kind == TokenKind::Mul ? Op::Mul : Op::Div;
            ++pos_;
            lhs = ExprTree::binary(op, lhs, factor());
        }
        return lhs;
    }

    ExprTree factor() {
        if (at(TokenKind::Square) || at(TokenKind::Sqrt)) {
            const Op op = peek().kind == TokenKind::Square ? Op::Square : Op::Sqrt;
            ++pos_;
            return ExprTree::unary(op, atom());
        }
        return atom();
    }

    ExprTree atom() {
        if (pos_ >= tokens_.size()) throw ParseError(pos_, "expected operand, found end of input");
        const Token t = peek();
        if (t.is_channel()) {
            ++pos_;
            return ExprTree::channel(t.channel);
        }
        if (t.kind == TokenKind::LParen) {
            const std::size_t open_pos = pos_++;
            ExprTree inner = expr();
            if (!at(TokenKind::RParen)) {
                if (pos_ >= tokens_.size()) throw ParseError(pos_, "unclosed '('");
                throw ParseError(pos_, "expected ')', found '" + spelling(peek()) + "'");
            }
            if (pos_ == open_pos + 2) throw ParseError(pos_, "parentheses around a single token");
            ++pos_;
            return inner;
        }
        throw ParseError(pos_, "expected operand, found '" + spelling(t) + "'");
    }

    std::span<const Token> tokens_;
    std::size_t pos_ = 0;
};

inline int precedence(Op op) noexcept {
    switch (op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        default: return 3;
    }
}

inline char op_char(Op op) noexcept {
    switch (op) {
        case Op::Add: return '+';
        case Op::Sub: return '-';
        case Op::Mul: return '*';
        default: return '/';
    }
}

inline void render_into(const ExprTree& t, std::string& out) {
    switch (t.op()) {
        case Op::Channel: out += "c" + std::to_string(t.channel_index()); return;
        case Op::Square:
        case Op::Sqrt:
            out += t.op() == Op::Square ? "square(" : "sqrt(";
            render_into(t.child(), out);
            out += ')';
            return;
        default: break;
    }
    const int p = precedence(t.op());
    const ExprTree l = t.lhs();
    const ExprTree r = t.rhs();
    // Left associativity: a same-precedence left child needs no parentheses,
    // a same-precedence right child does (keeps the tree shape exact).
    const bool wrap_l = precedence(l.op()) < p;
    const bool wrap_r = precedence(r.op()) <= p;
    if (wrap_l) out += '(';
    render_into(l, out);
    if (wrap_l) out += ')';
    out += op_char(t.op());
    if (wrap_r) out += '(';
    render_into(r, out);
    if (wrap_r) out += ')';
}

}  // namespace detail

/// Parses a terminal token sequence. Throws ParseError naming the offending position.
inline ExprTree parse(std::span<const Token> tokens, std::size_t max_len = kDefaultMaxLen) {
    if (tokens.size() > max_len) throw ParseError(max_len, "sequence longer than max_len");
    return detail::Parser(tokens).parse_all();
}

inline ExprTree parse(const TokenSequence& seq) { return parse(seq.tokens(), seq.max_len()); }

/// Lexes expression text into tokens.
///
/// Accepts c<k>, sqrt, square, ( ) + - * / = and the glyphs × − ÷, with
/// optional whitespace. A group holding a single channel, "(c1)", lexes to
/// the bare channel; this is how "sqrt(c1)" maps to the two tokens
/// sqrt c1. A missing trailing "=" is appended.
inline std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> raw;
    std::size_t i = 0;
    auto starts = [&](std::string_view s) { return text.substr(i, s.size()) == s; };
    while (i < text.size()) {
        const char ch = text[i];
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
            ++i;
        } else if (ch == 'c' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
            std::size_t j = i + 1;
            std::uint64_t k = 0;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
                k = k * 10 + static_cast<std::uint64_t>(text[j] - '0');
                if (k > 1'000'000) throw ParseError(i, "channel index too large");
                ++j;
            }
            raw.push_back(Token::chan(static_cast<std::uint32_t>(k)));
            i = j;
        } else if (starts("sqrt")) {
            raw.push_back(Token::sqrt());
            i += 4;
        } else if (starts("square")) {
            raw.push_back(Token::square());
            i += 6;
        } else if (starts("×")) {
            raw.push_back(Token::mul());
            i += 2;
        } else if (starts("÷")) {
            raw.push_back(Token::div());
            i += 2;
        } else if (starts("−")) {
            raw.push_back(Token::minus());
            i += 3;
        } else {
            switch (ch) {
                case '(': raw.push_back(Token::lparen()); break;
                case ')': raw.push_back(Token::rparen()); break;
                case '+': raw.push_back(Token::plus()); break;
                case '-': raw.push_back(Token::minus()); break;
                case '*': raw.push_back(Token::mul()); break;
                case '/': raw.push_back(Token::div()); break;
                case '=': raw.push_back(Token::end()); break;
                default: throw ParseError(i, std::string("unexpected character '") + ch + "'");
            }
            ++i;
        }
    }
    // Collapse "( c )" until none remain.
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<Token> out;
        out.reserve(raw.size());
        for (std::size_t k = 0; k < raw.size(); ++k) {
            if (k + 2 < raw.size() && raw[k].kind == TokenKind::LParen && raw[k + 1].is_channel() &&
                raw[k + 2].kind == TokenKind::RParen) {
                out.push_back(raw[k + 1]);
                k += 2;
                changed = true;
            } else {
                out.push_back(raw[k]);
            }
        }
        raw = std::move(out);
    }
    if (raw.empty() || raw.back().kind != TokenKind::End) raw.push_back(Token::end());
    return raw;
}

/// Literal text of a token sequence (not necessarily terminal).
/// tokenize(to_text(s)) == s for every valid sequence.
inline std::string to_text(std::span<const Token> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out += spelling(tokens[i]);
        if (tokens[i].is_unary() && i + 1 < tokens.size() && tokens[i + 1].is_channel()) {
            out += '(' + spelling(tokens[i + 1]) + ')';
            ++i;
        }
    }
    return out;
}

inline std::string to_text(const TokenSequence& seq) { return to_text(seq.tokens()); }

/// Canonical text with minimal parentheses and a trailing "=".
inline std::string render(const ExprTree& tree) {
    std::string out;
    detail::render_into(tree, out);
    out += '=';
    return out;
}

/// Parses expression text (see tokenize) into a tree.
inline ExprTree parse_text(std::string_view text, std::size_t max_len = kDefaultMaxLen) {
    return parse(tokenize(text), max_len);
}

/// Token form of a tree, via its canonical rendering.
inline std::vector<Token> to_tokens(const ExprTree& tree) { return tokenize(render(tree)); }

/// Unit exponent of an expression when every channel carries exponent 1.
///
/// Either an exact rational, or Mixed when terms with different exponents
/// are added or subtracted.
class UnitExponent {
public:
    using Rational = boost::rational<std::int64_t>;

    static UnitExponent mixed() { return UnitExponent(); }
    static UnitExponent of(Rational r) { return UnitExponent(r); }

    bool is_mixed() const noexcept { return !value_.has_value(); }
    const Rational& value() const {
        if (!value_) throw ContractError("mixed unit exponent has no value");
        return *value_;
    }
    bool is_unitless() const noexcept { return value_ && value_->numerator() == 0; }

    friend bool operator==(const UnitExponent&, const UnitExponent&) = default;

private:
    UnitExponent() = default;
    explicit UnitExponent(Rational r) : value_(r) {}

    std::optional<Rational> value_;
};

inline UnitExponent unit_exponent(const ExprTree& tree) {
    using R = UnitExponent::Rational;
    switch (tree.op()) {
        case Op::Channel: return UnitExponent::of(R(1));
        case Op::Square:
        case Op::Sqrt: {
            const auto c = unit_exponent(tree.child());
            if (c.is_mixed()) return c;
            return UnitExponent::of(tree.op() == Op::Square ? c.value() * R(2) : c.value() / R(2));
        }
        default: break;
    }
    const auto l = unit_exponent(tree.lhs());
    const auto r = unit_exponent(tree.rhs());
    if (l.is_mixed() || r.is_mixed()) return UnitExponent::mixed();
    switch (tree.op()) {
        case Op::Add:
        case Op::Sub: return l.value() == r.value() ? l : UnitExponent::mixed();
        case Op::Mul: return UnitExponent::of(l.value() + r.value());
        default: return UnitExponent::of(l.value() - r.value());
    }
}

namespace detail {

inline void flatten_additive(const ExprTree& t, bool negative, std::vector<std::pair<ExprTree, bool>>& terms) {
    if (t.op() == Op::Add || t.op() == Op::Sub) {
        flatten_additive(t.lhs(), negative, terms);
        flatten_additive(t.rhs(), t.op() == Op::Sub ? !negative : negative, terms);
        return;
    }
    terms.emplace_back(t, negative);
}

}  // namespace detail

/// Drops bare-channel terms from the top-level +/- chain.
///
/// With one surviving term its sign is dropped. With several, a positive
/// term leads the rebuilt chain; if every survivor is negative all signs
/// are flipped. If nothing survives the tree is returned unchanged.
inline ExprTree minify(const ExprTree& tree) {
    std::vector<std::pair<ExprTree, bool>> terms;
    detail::flatten_additive(tree, false, terms);
    std::vector<std::pair<ExprTree, bool>> kept;
    for (auto& term : terms)
        if (!term.first.is_channel()) kept.push_back(term);
    if (kept.empty()) return tree;
    if (kept.size() == 1) return kept.front().first;

    auto lead = std::find_if(kept.begin(), kept.end(), [](const auto& t) { return !t.second; });
    if (lead == kept.end()) {
        for (auto& t : kept) t.second = false;
        lead = kept.begin();
    }
    std::rotate(kept.begin(), lead, lead + 1);

    ExprTree acc = kept.front().first;
    for (std::size_t i = 1; i < kept.size(); ++i)
        acc = ExprTree::binary(kept[i].second ? Op::Sub : Op::Add, acc, kept[i].first);
    return acc;
}

}  // namespace indexforge
