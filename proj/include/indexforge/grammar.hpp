#pragma once

/**
 * Incremental validity automaton over expression tokens.
 *
 * Transitions follow the previous-action table: operands may follow the
 * start, "(", a binary operator or a unary operator; binary operators, ")"
 * and "=" may follow an operand or ")". Unary operators are prefix
 * operators accepted wherever "(" is, and must be followed by "(" or a
 * channel. ")" needs an unclosed "(" and may not close a group holding a
 * single token. "=" needs every parenthesis closed.
 *
 * On top of the table, an action is only offered when the sequence can
 * still be completed to a terminal expression within max_len.
 */

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "indexforge/error.hpp"
#include "indexforge/token.hpp"

namespace indexforge {

/// Summary of a valid prefix; enough to decide the next valid actions.
struct PrefixState {
    enum class Last : unsigned char { Start, LParen, Binary, Unary, Operand, RParen, End };

    Last last = Last::Start;
    std::size_t length = 0;
    std::size_t open = 0;
    // Previous token is a channel that directly follows "(".
    bool single_in_group = false;

    bool terminal() const noexcept { return last == Last::End; }

    bool needs_operand() const noexcept {
        return last == Last::Start || last == Last::LParen || last == Last::Binary || last == Last::Unary;
    }

    /// Structural validity of appending t, ignoring the length budget.
    bool accepts(Token t) const noexcept {
        switch (last) {
            case Last::End: return false;
            case Last::Start:
            case Last::LParen:
            case Last::Binary: return t.kind == TokenKind::LParen || t.is_unary() || t.is_channel();
            case Last::Unary: return t.kind == TokenKind::LParen || t.is_channel();
            case Last::Operand:
            case Last::RParen:
                if (t.is_binary()) return true;
                if (t.kind == TokenKind::RParen) return open > 0 && !single_in_group;
                if (t.kind == TokenKind::End) return open == 0;
                return false;
        }
        return false;
    }

    /// Fewest additional tokens (End included) that complete this prefix.
    std::size_t min_completion() const noexcept {
        switch (last) {
            case Last::End: return 0;
            // "( sqrt c )" closes a fresh group in two tokens; "( c )" is not allowed.
            case Last::LParen: return 2 + open + 1;
            case Last::Start:
            case Last::Binary:
            case Last::Unary: return 1 + open + 1;
            case Last::Operand:
            case Last::RParen: return (single_in_group && open > 0 ? 2 : 0) + open + 1;
        }
        return 0;
    }

    PrefixState advanced(Token t) const noexcept {
        PrefixState next = *this;
        next.length = length + 1;
        next.single_in_group = false;
        switch (t.kind) {
            case TokenKind::LParen:
                next.last = Last::LParen;
                ++next.open;
                break;
            case TokenKind::RParen:
                next.last = Last::RParen;
                --next.open;
                break;
            case TokenKind::Plus:
            case TokenKind::Minus:
            case TokenKind::Mul:
            case TokenKind::Div: next.last = Last::Binary; break;
            case TokenKind::Square:
            case TokenKind::Sqrt: next.last = Last::Unary; break;
            case TokenKind::End: next.last = Last::End; break;
            case TokenKind::Channel:
                next.single_in_group = last == Last::LParen;
                next.last = Last::Operand;
                break;
        }
        return next;
    }

    /// Appending t is structurally valid and still completable within max_len.
    bool allows(Token t, std::size_t max_len) const noexcept {
        if (length >= max_len || !accepts(t)) return false;
        const PrefixState next = advanced(t);
        return next.length + next.min_completion() <= max_len;
    }
};

/// Runs the automaton over a token prefix. Returns nullopt when some token
/// is not a valid action from the state before it (budget ignored).
inline std::optional<PrefixState> scan_prefix(std::span<const Token> tokens) {
    PrefixState state;
    for (auto t : tokens) {
        if (!state.accepts(t)) return std::nullopt;
        state = state.advanced(t);
    }
    return state;
}

/// Valid actions from state, in ascending token id.
inline std::vector<Token> valid_next_actions(const PrefixState& state, std::size_t n_channels,
                                             std::size_t max_len) {
    std::vector<Token> out;
    out.reserve(vocab_size(n_channels));
    for (std::size_t id = 0; id < vocab_size(n_channels); ++id) {
        const Token t = Token::from_id(id);
        if (state.allows(t, max_len)) out.push_back(t);
    }
    return out;
}

inline std::vector<Token> valid_next_actions(const TokenSequence& seq, std::size_t n_channels) {
    if (seq.is_terminal()) throw ContractError("terminal state has no actions");
    if (seq.size() >= seq.max_len()) throw ContractError("length budget exhausted");
    for (auto t : seq.tokens())
        if (t.is_channel() && t.channel >= n_channels)
            throw ContractError("state references channel c" + std::to_string(t.channel) + " outside the vocabulary");
    const auto state = scan_prefix(seq.tokens());
    if (!state) throw ContractError("state is not a valid prefix");
    return valid_next_actions(*state, n_channels, seq.max_len());
}

}  // namespace indexforge
