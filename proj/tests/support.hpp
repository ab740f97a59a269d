#pragma once

// Helpers shared by the unit tests and the acceptance runner. The oracles
// here deliberately avoid the library's parser and evaluator.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <algorithm>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "indexforge/indexforge.hpp"

namespace testsupport {

using namespace indexforge;

/// Uniform random walk over valid actions until End.
inline TokenSequence random_walk(Rng& rng, std::size_t n_channels, std::size_t max_len = kDefaultMaxLen) {
    TokenSequence s(max_len);
    while (!s.is_terminal()) {
        const auto acts = valid_next_actions(s, n_channels);
        if (acts.empty()) throw std::logic_error("dead end at " + to_text(s));
        s.push_back(acts[rng.index(acts.size())]);
    }
    return s;
}

struct EquivalenceReport {
    std::size_t sequences = 0;
    std::size_t accepted = 0;
    std::size_t disagreements = 0;
    std::string first_disagreement;
};

/// Every token sequence of length 1..max_len over the vocabulary: does
/// stepping through valid_next_actions reach a terminal state exactly when
/// the parser accepts?
inline EquivalenceReport exhaustive_equivalence(std::size_t max_len, std::size_t n_channels) {
    EquivalenceReport rep;
    const std::size_t V = vocab_size(n_channels);
    std::vector<Token> seq;
    std::function<void()> rec = [&] {
        if (!seq.empty()) {
            ++rep.sequences;
            bool automaton = true;
            PrefixState st;
            for (Token t : seq) {
                const auto acts = valid_next_actions(st, n_channels, max_len);
                if (std::find(acts.begin(), acts.end(), t) == acts.end()) {
                    automaton = false;
                    break;
                }
                st = st.advanced(t);
            }
            automaton = automaton && st.terminal();
            bool parser = true;
            try {
                (void)parse(seq, max_len);
            } catch (const ParseError&) {
                parser = false;
            }
            rep.accepted += parser;
            if (automaton != parser) {
                if (rep.disagreements++ == 0) rep.first_disagreement = to_text(seq);
            }
        }
        if (seq.size() == max_len) return;
        for (std::size_t id = 0; id < V; ++id) {
            seq.push_back(Token::from_id(id));
            rec();
            seq.pop_back();
        }
    };
    rec();
    return rep;
}

/// Shunting-yard interpreter over raw tokens for one pixel.
class ScalarInterpreter {
public:
    explicit ScalarInterpreter(std::span<const Token> tokens) : tokens_(tokens.begin(), tokens.end()) {}

    double operator()(const std::vector<double>& pixel) const {
        std::vector<double> vals;
        std::vector<Token> ops;
        auto prec = [](Token t) {
            if (t.kind == TokenKind::Plus || t.kind == TokenKind::Minus) return 1;
            if (t.kind == TokenKind::Mul || t.kind == TokenKind::Div) return 2;
            return 3;
        };
        auto apply = [&](Token op) {
            if (op.is_unary()) {
                double& a = vals.back();
                a = op.kind == TokenKind::Square ? a * a : std::sqrt(a);
                return;
            }
            const double b = vals.back();
            vals.pop_back();
            double& a = vals.back();
            switch (op.kind) {
                case TokenKind::Plus: a = a + b; break;
                case TokenKind::Minus: a = a - b; break;
                case TokenKind::Mul: a = a * b; break;
                default: a = a / b; break;
            }
        };
        // Unary operators bind to the next atom only.
        auto reduce_unary = [&]() {
            while (!ops.empty() && ops.back().is_unary()) {
                apply(ops.back());
                ops.pop_back();
            }
        };
        for (Token t : tokens_) {
            if (t.is_channel()) {
                vals.push_back(pixel.at(t.channel));
                reduce_unary();
            } else if (t.is_unary() || t.kind == TokenKind::LParen) {
                ops.push_back(t);
            } else if (t.kind == TokenKind::RParen) {
                while (ops.back().kind != TokenKind::LParen) {
                    apply(ops.back());
                    ops.pop_back();
                }
                ops.pop_back();
                reduce_unary();
            } else if (t.is_binary()) {
                while (!ops.empty() && ops.back().is_binary() && prec(ops.back()) >= prec(t)) {
                    apply(ops.back());
                    ops.pop_back();
                }
                ops.push_back(t);
            } else {
                break;  // End
            }
        }
        while (!ops.empty()) {
            apply(ops.back());
            ops.pop_back();
        }
        return vals.back();
    }

private:
    std::vector<Token> tokens_;
};

inline Image random_image(Rng& rng, std::size_t c, std::size_t h, std::size_t w, double lo = 0.05,
                          double hi = 1.0) {
    Image img(c, h, w);
    for (auto& v : img.values) v = static_cast<float>(rng.uniform(lo, hi));
    return img;
}

/// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& stem) {
        path_ = std::filesystem::temp_directory_path() /
                (stem + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    static std::size_t& counter() {
        static std::size_t c = 0;
        return c;
    }
    std::filesystem::path path_;
};

inline RunOptions options(const std::filesystem::path& out_dir) {
    RunOptions o;
    o.out_dir = out_dir;
    return o;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testsupport
