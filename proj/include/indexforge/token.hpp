#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "indexforge/error.hpp"

namespace indexforge {

enum class TokenKind : std::uint8_t {
    LParen,
    RParen,
    Plus,
    Minus,
    Mul,
    Div,
    Square,
    Sqrt,
    End,
    Channel,
};

/// Number of non-channel tokens: eight expression symbols plus End.
inline constexpr std::size_t kFixedTokens = 9;

/// Default maximum sequence length, End included.
inline constexpr std::size_t kDefaultMaxLen = 24;

constexpr std::size_t vocab_size(std::size_t n_channels) noexcept { return kFixedTokens + n_channels; }

/// One action of the expression environment.
///
/// Token ids are dense: the fixed symbols occupy 0..8 in declaration order
/// and channel k has id 9 + k. Ordering and tie-breaks use this id.
struct Token {
    TokenKind kind = TokenKind::End;
    std::uint32_t channel = 0;

    static constexpr Token lparen() noexcept { return {TokenKind::LParen, 0}; }
    static constexpr Token rparen() noexcept { return {TokenKind::RParen, 0}; }
    static constexpr Token plus() noexcept { return {TokenKind::Plus, 0}; }
    static constexpr Token minus() noexcept { return {TokenKind::Minus, 0}; }
    static constexpr Token mul() noexcept { return {TokenKind::Mul, 0}; }
    static constexpr Token div() noexcept { return {TokenKind::Div, 0}; }
    static constexpr Token square() noexcept { return {TokenKind::Square, 0}; }
    static constexpr Token sqrt() noexcept { return {TokenKind::Sqrt, 0}; }
    static constexpr Token end() noexcept { return {TokenKind::End, 0}; }
    static constexpr Token chan(std::uint32_t k) noexcept { return {TokenKind::Channel, k}; }

    static constexpr Token from_id(std::size_t id) noexcept {
        if (id >= kFixedTokens) return chan(static_cast<std::uint32_t>(id - kFixedTokens));
        return {static_cast<TokenKind>(id), 0};
    }

    constexpr std::size_t id() const noexcept {
        return kind == TokenKind::Channel ? kFixedTokens + channel : static_cast<std::size_t>(kind);
    }

    constexpr bool is_channel() const noexcept { return kind == TokenKind::Channel; }
    constexpr bool is_binary() const noexcept {
        return kind == TokenKind::Plus || kind == TokenKind::Minus || kind == TokenKind::Mul ||
               kind == TokenKind::Div;
    }
    constexpr bool is_unary() const noexcept { return kind == TokenKind::Square || kind == TokenKind::Sqrt; }

    friend constexpr bool operator==(Token a, Token b) noexcept { return a.id() == b.id(); }
    friend constexpr auto operator<=>(Token a, Token b) noexcept { return a.id() <=> b.id(); }
};

/// Spelling of a single token as it appears in expression text.
inline std::string spelling(Token t) {
    switch (t.kind) {
        case TokenKind::LParen: return "(";
        case TokenKind::RParen: return ")";
        case TokenKind::Plus: return "+";
        case TokenKind::Minus: return "-";
        case TokenKind::Mul: return "*";
        case TokenKind::Div: return "/";
        case TokenKind::Square: return "square";
        case TokenKind::Sqrt: return "sqrt";
        case TokenKind::End: return "=";
        case TokenKind::Channel: return "c" + std::to_string(t.channel);
    }
    return "?";
}

/// An expression as an RL state: tokens in in-order notation.
class TokenSequence {
public:
    TokenSequence() = default;
    explicit TokenSequence(std::size_t max_len) : max_len_(max_len) {
        if (max_len == 0) throw ContractError("max_len must be positive");
    }
    explicit TokenSequence(std::vector<Token> tokens, std::size_t max_len = kDefaultMaxLen)
        : tokens_(std::move(tokens)), max_len_(max_len) {
        if (max_len == 0) throw ContractError("max_len must be positive");
        if (tokens_.size() > max_len_) throw ContractError("token sequence longer than max_len");
    }

    std::span<const Token> tokens() const noexcept { return tokens_; }
    std::size_t size() const noexcept { return tokens_.size(); }
    bool empty() const noexcept { return tokens_.empty(); }
    std::size_t max_len() const noexcept { return max_len_; }
    Token operator[](std::size_t i) const { return tokens_[i]; }
    Token back() const { return tokens_.back(); }

    /// True iff the last token is End and End occurs exactly once.
    bool is_terminal() const noexcept {
        if (tokens_.empty() || tokens_.back().kind != TokenKind::End) return false;
        std::size_t ends = 0;
        for (auto t : tokens_) ends += t.kind == TokenKind::End;
        return ends == 1;
    }

    /// Length budget used up without reaching End.
    bool is_truncated() const noexcept { return tokens_.size() >= max_len_ && !is_terminal(); }

    void push_back(Token t) {
        if (tokens_.size() >= max_len_) throw ContractError("length budget exhausted");
        tokens_.push_back(t);
    }

    /// Highest channel index referenced plus one (0 when no channel appears).
    std::size_t channel_span() const noexcept {
        std::size_t n = 0;
        for (auto t : tokens_)
            if (t.is_channel()) n = std::max<std::size_t>(n, t.channel + 1);
        return n;
    }

    friend bool operator==(const TokenSequence& a, const TokenSequence& b) noexcept {
        return a.tokens_ == b.tokens_;
    }

private:
    std::vector<Token> tokens_;
    std::size_t max_len_ = kDefaultMaxLen;
};

}  // namespace indexforge
