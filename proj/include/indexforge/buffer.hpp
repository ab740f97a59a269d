#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "indexforge/error.hpp"
#include "indexforge/expr.hpp"
#include "indexforge/stats.hpp"
#include "indexforge/token.hpp"

namespace indexforge {

struct BufferEntry {
    TokenSequence expression;
    std::string text;  // to_text(expression); the deduplication key
    double reward = 0.0;
};

/// Total order of the buffer: reward descending, then shorter, then text.
inline bool ranks_before(const BufferEntry& a, const BufferEntry& b) noexcept {
    if (a.reward != b.reward) return a.reward > b.reward;
    if (a.expression.size() != b.expression.size()) return a.expression.size() < b.expression.size();
    return a.text < b.text;
}

/// floor(initial * 0.95^shrinks), computed exactly, clamped below at min.
inline std::size_t shrunk_capacity(std::size_t initial, std::size_t shrinks, std::size_t min_capacity) {
    using boost::multiprecision::cpp_int;
    cpp_int num = initial;
    cpp_int den = 1;
    for (std::size_t k = 0; k < shrinks; ++k) {
        num *= 19;
        den *= 20;
        if (num / den < min_capacity) return min_capacity;
    }
    const cpp_int v = num / den;
    return std::max(min_capacity, static_cast<std::size_t>(v));
}

/// Reward-ranked expression store whose capacity shrinks by 5% per step.
class AdaptiveBuffer {
public:
    explicit AdaptiveBuffer(std::size_t initial_capacity = 200, std::size_t min_capacity = 20)
        : initial_(std::max(initial_capacity, min_capacity)), min_(min_capacity) {
        if (min_capacity == 0) throw ContractError("min_capacity must be positive");
    }

    std::size_t capacity() const { return shrunk_capacity(initial_, shrinks_, min_); }
    std::size_t initial_capacity() const noexcept { return initial_; }
    std::size_t min_capacity() const noexcept { return min_; }
    std::size_t shrink_count() const noexcept { return shrinks_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    bool full() const { return entries_.size() >= capacity(); }
    const std::vector<BufferEntry>& entries() const noexcept { return entries_; }

    /// Adds a terminal, parseable expression. A duplicate text keeps the
    /// larger reward; overflow evicts the lowest-ranked entry.
    void insert(const TokenSequence& expression, double reward) {
        if (!std::isfinite(reward)) throw ContractError("buffer reward must be finite");
        if (!expression.is_terminal()) throw ContractError("buffer accepts only terminal expressions");
        (void)parse(expression);  // throws ParseError for an invalid expression
        BufferEntry e{expression, to_text(expression), reward};
        for (auto& old : entries_)
            if (old.text == e.text) {
                if (reward > old.reward) {
                    old.reward = reward;
                    std::sort(entries_.begin(), entries_.end(), ranks_before);
                }
                return;
            }
        entries_.insert(std::upper_bound(entries_.begin(), entries_.end(), e, ranks_before), std::move(e));
        trim();
    }

    /// One 5% step; returns the new capacity.
    std::size_t shrink() {
        if (capacity() > min_) ++shrinks_;
        trim();
        return capacity();
    }

    std::vector<BufferEntry> top_k(std::size_t k) const {
        if (k == 0) throw ContractError("top_k needs k >= 1");
        return {entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(std::min(k, entries_.size()))};
    }

    std::vector<TokenSequence> expressions() const {
        std::vector<TokenSequence> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.expression);
        return out;
    }

    /// Correctly rounded mean reward; 0 for an empty buffer.
    double mean_reward() const {
        if (entries_.empty()) return 0.0;
        std::vector<double> r;
        r.reserve(entries_.size());
        for (const auto& e : entries_) r.push_back(e.reward);
        return mean(r);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["initial_capacity"] = initial_;
        j["min_capacity"] = min_;
        j["shrinks"] = shrinks_;
        j["capacity"] = capacity();
        j["max_len"] = entries_.empty() ? kDefaultMaxLen : entries_.front().expression.max_len();
        j["entries"] = nlohmann::json::array();
        for (const auto& e : entries_) j["entries"].push_back({{"text", e.text}, {"reward", e.reward}});
        return j;
    }

    static AdaptiveBuffer from_json(const nlohmann::json& j, std::size_t max_len = kDefaultMaxLen) {
        try {
            AdaptiveBuffer b(j.at("initial_capacity").get<std::size_t>(), j.at("min_capacity").get<std::size_t>());
            b.shrinks_ = j.at("shrinks").get<std::size_t>();
            for (const auto& e : j.at("entries")) {
                TokenSequence seq(tokenize(e.at("text").get<std::string>()), max_len);
                b.insert(seq, e.at("reward").get<double>());
            }
            return b;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("malformed buffer snapshot: ") + e.what());
        }
    }

private:
    void trim() {
        const std::size_t cap = capacity();
        if (entries_.size() > cap) entries_.resize(cap);
    }

    std::size_t initial_;
    std::size_t min_;
    std::size_t shrinks_ = 0;
    std::vector<BufferEntry> entries_;
};

}  // namespace indexforge
