#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <map>
#include <tuple>

#include "support.hpp"

using namespace indexforge;

namespace {

std::size_t capacity_oracle(std::size_t initial, std::size_t k, std::size_t min) {
    using boost::multiprecision::cpp_rational;
    cpp_rational v = initial;
    for (std::size_t i = 0; i < k; ++i) v *= cpp_rational(95, 100);
    const auto floor = boost::multiprecision::numerator(v) / boost::multiprecision::denominator(v);
    return std::max(min, static_cast<std::size_t>(floor));
}

// Best reward ever offered per text, ranked and cut at the current capacity.
struct Reference {
    std::map<std::string, std::pair<double, std::size_t>> best;

    std::vector<std::pair<std::string, double>> view(std::size_t cap) const {
        std::vector<std::tuple<double, std::size_t, std::string>> all;
        for (const auto& [t, v] : best) all.emplace_back(v.first, v.second, t);
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
            return std::get<2>(a) < std::get<2>(b);
        });
        std::vector<std::pair<std::string, double>> out;
        for (std::size_t i = 0; i < std::min(cap, all.size()); ++i)
            out.emplace_back(std::get<2>(all[i]), std::get<0>(all[i]));
        return out;
    }
};

std::vector<std::pair<std::string, double>> contents(const AdaptiveBuffer& b) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& e : b.entries()) out.emplace_back(e.text, e.reward);
    return out;
}

std::vector<TokenSequence> pool(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TokenSequence> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(testsupport::random_walk(rng, 2, 7));
    return out;
}

}  // namespace

TEST(BufferCapacity, MatchesExactLaw) {
    AdaptiveBuffer b(200, 20);
    for (std::size_t k = 0; k <= 120; ++k) {
        ASSERT_EQ(b.capacity(), capacity_oracle(200, k, 20)) << "k=" << k;
        b.shrink();
    }
    EXPECT_EQ(shrunk_capacity(200, 1, 20), 190u);
    EXPECT_EQ(shrunk_capacity(200, 2, 20), 180u);
    EXPECT_EQ(shrunk_capacity(200, 3, 20), 171u);
    EXPECT_EQ(shrunk_capacity(200, 4, 20), 162u);
    EXPECT_EQ(shrunk_capacity(200, 1000, 20), 20u);
}

TEST(BufferCapacity, OtherSizes) {
    for (std::size_t initial : {1u, 7u, 20u, 50u, 1000u})
        for (std::size_t min : {1u, 5u, 20u})
            for (std::size_t k = 0; k < 80; ++k) {
                const std::size_t start = std::max(initial, min);
                ASSERT_EQ(shrunk_capacity(start, k, min), capacity_oracle(start, k, min));
            }
}

TEST(Buffer, MatchesReferenceUnderRandomInterleavings) {
    const auto exprs = pool(60, 1);
    Rng rng(2);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t initial = 3 + rng.index(30);
        const std::size_t min = 1 + rng.index(initial);
        AdaptiveBuffer b(initial, min);
        Reference ref;
        for (int op = 0; op < 60; ++op) {
            if (rng.uniform() < 0.15) {
                b.shrink();
            } else {
                const auto& s = exprs[rng.index(exprs.size())];
                const double r = static_cast<double>(rng.index(6)) / 4.0 - 0.25;
                b.insert(s, r);
                auto& slot = ref.best[to_text(s)];
                if (slot.second == 0 || r > slot.first) slot = {r, s.size()};
            }
            ASSERT_EQ(contents(b), ref.view(b.capacity())) << "trial " << trial << " op " << op;
            ASSERT_EQ(b.capacity(), capacity_oracle(initial, b.shrink_count(), min));
        }
    }
}

TEST(Buffer, DeduplicatesKeepingMax) {
    AdaptiveBuffer b(5, 2);
    const TokenSequence s(tokenize("c0+c1="));
    b.insert(s, 0.3);
    b.insert(s, 0.7);
    b.insert(s, 0.1);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b.entries()[0].reward, 0.7);
}

TEST(Buffer, TieBreaksShorterThenText) {
    AdaptiveBuffer b(10, 1);
    b.insert(TokenSequence(tokenize("c1*c0=")), 0.5);
    b.insert(TokenSequence(tokenize("c0*c1=")), 0.5);
    b.insert(TokenSequence(tokenize("c0=")), 0.5);
    b.insert(TokenSequence(tokenize("c1=")), 0.9);
    std::vector<std::string> order;
    for (const auto& e : b.entries()) order.push_back(e.text);
    EXPECT_EQ(order, (std::vector<std::string>{"c1=", "c0=", "c0*c1=", "c1*c0="}));
    EXPECT_EQ(b.top_k(2).size(), 2u);
    EXPECT_EQ(b.top_k(10).size(), 4u);
    EXPECT_THROW(b.top_k(0), ContractError);
}

TEST(Buffer, RejectsBadEntries) {
    AdaptiveBuffer b;
    EXPECT_THROW(b.insert(TokenSequence(tokenize("c0=")), std::nan("")), ContractError);
    TokenSequence running;
    running.push_back(Token::chan(0));
    EXPECT_THROW(b.insert(running, 0.1), ContractError);
    EXPECT_THROW(b.insert(TokenSequence(std::vector<Token>{Token::chan(0), Token::plus(), Token::end()}), 0.1),
                 ParseError);
    EXPECT_THROW(AdaptiveBuffer(10, 0), ContractError);
}

TEST(Buffer, MeanIsCorrectlyRounded) {
    using boost::multiprecision::cpp_rational;
    Rng rng(5);
    const auto exprs = pool(80, 6);
    AdaptiveBuffer b(200, 20);
    for (const auto& s : exprs) b.insert(s, rng.uniform(-1.0, 3.0) * 1e-3 + rng.uniform());
    cpp_rational sum = 0;
    for (const auto& e : b.entries()) sum += cpp_rational(e.reward);
    const cpp_rational exact = sum / b.size();
    const double m = b.mean_reward();
    // No double lies strictly between the exact mean and m.
    const double lo = std::nextafter(m, -1e300), hi = std::nextafter(m, 1e300);
    EXPECT_LE(abs(cpp_rational(m) - exact), abs(cpp_rational(lo) - exact));
    EXPECT_LE(abs(cpp_rational(m) - exact), abs(cpp_rational(hi) - exact));
    EXPECT_EQ(AdaptiveBuffer().mean_reward(), 0.0);
}

TEST(Buffer, JsonRoundTrip) {
    Rng rng(7);
    const auto exprs = pool(40, 8);
    AdaptiveBuffer b(30, 5);
    for (const auto& s : exprs) b.insert(s, rng.uniform());
    b.shrink();
    b.shrink();
    const auto back = AdaptiveBuffer::from_json(nlohmann::json::parse(b.to_json().dump()));
    EXPECT_EQ(contents(back), contents(b));
    EXPECT_EQ(back.capacity(), b.capacity());
    EXPECT_EQ(back.shrink_count(), 2u);
    EXPECT_THROW(AdaptiveBuffer::from_json(nlohmann::json::object()), DataError);
}
