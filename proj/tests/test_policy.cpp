#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "support.hpp"

using namespace indexforge;

namespace {

std::vector<TokenSequence> distinct_walks(std::size_t n, std::size_t channels, std::uint64_t seed,
                                          std::size_t max_len = kDefaultMaxLen) {
    Rng rng(seed);
    std::vector<TokenSequence> out;
    std::set<std::string> seen;
    while (out.size() < n) {
        auto s = testsupport::random_walk(rng, channels, max_len);
        if (seen.insert(to_text(s)).second) out.push_back(std::move(s));
    }
    return out;
}

PolicyConfig small_config() {
    PolicyConfig c;
    c.embedding_dim = 8;
    c.hidden = 16;
    return c;
}

}  // namespace

TEST(Policy, ShapesAndParameterCount) {
    const auto p = Policy::init(3, PolicyConfig{}, 1);
    EXPECT_EQ(p.vocab(), 12u);
    EXPECT_EQ(p.pad_id(), 12u);
    std::size_t total = 0;
    for (const auto& [name, r, c] : p.shapes()) total += r * c;
    EXPECT_EQ(total, p.parameter_count());
    EXPECT_EQ(p.parameter_count(), 13u * 32 + 256u * 64 + 64 + 64u * 64 + 64 + 64u * 12 + 12);
}

TEST(Policy, WindowIsLeftPadded) {
    const auto p = Policy::init(2, PolicyConfig{}, 1);
    const auto ex = p.window(tokenize("c0+c1"));  // four tokens incl. "="
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(ex.context[i], p.pad_id());
    EXPECT_EQ(ex.context[4], Token::chan(0).id());
    EXPECT_EQ(ex.context[7], Token::end().id());
}

TEST(Policy, GradientMatchesCentralDifferences) {
    const auto p0 = Policy::init(3, small_config(), 4);
    const auto entries = distinct_walks(6, 3, 5);
    const auto g = policy_gradient(p0, entries);
    Rng rng(6);
    std::size_t checked = 0, zero_checked = 0;
    while (checked < 40) {
        const std::size_t i = rng.index(p0.parameter_count());
        Policy plus = p0, minus = p0;
        const float x = p0.parameters()[i];
        plus.parameters()[i] = static_cast<float>(x + 1e-4);
        minus.parameters()[i] = static_cast<float>(x - 1e-4);
        const double h = static_cast<double>(plus.parameters()[i]) - static_cast<double>(minus.parameters()[i]);
        const double fd = (policy_loss(plus, entries) - policy_loss(minus, entries)) / h;
        if (g[i] == 0.0) {
            // Parameters the loss never touches (unused embedding rows).
            EXPECT_NEAR(fd, 0.0, 1e-9);
            ++zero_checked;
            continue;
        }
        const double rel = std::abs(fd - g[i]) / std::max(std::abs(fd), std::abs(g[i]));
        EXPECT_LE(rel, 1e-3) << "coordinate " << i << " analytic " << g[i] << " numeric " << fd;
        ++checked;
    }
}

TEST(Policy, SnapshotLogitsAgree) {
    const auto p = Policy::init(4, PolicyConfig{}, 9);
    const PolicySnapshot snap(p);
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
        const auto s = testsupport::random_walk(rng, 4);
        for (std::size_t n = 0; n < s.size(); ++n) {
            const auto a = p.logits(s.tokens().subspan(0, n));
            const auto b = snap.logits(s.tokens().subspan(0, n));
            for (std::size_t j = 0; j < a.size(); ++j) ASSERT_NEAR(a[j], b[j], 1e-9);
        }
    }
}

TEST(Policy, DistributionIsMasked) {
    const auto p = Policy::init(3, PolicyConfig{}, 2);
    Rng rng(3);
    for (int k = 0; k < 50; ++k) {
        const auto s = testsupport::random_walk(rng, 3);
        for (std::size_t n = 0; n + 1 < s.size(); ++n) {
            TokenSequence prefix(std::vector<Token>(s.tokens().begin(), s.tokens().begin() + n));
            const auto dist = next_distribution(p, prefix);
            const auto valid = valid_next_actions(prefix, 3);
            double sum = 0;
            for (std::size_t id = 0; id < dist.size(); ++id) {
                const bool ok = std::find(valid.begin(), valid.end(), Token::from_id(id)) != valid.end();
                if (!ok) ASSERT_EQ(dist[id], 0.0);
                else ASSERT_GT(dist[id], 0.0);
                sum += dist[id];
            }
            ASSERT_NEAR(sum, 1.0, 1e-12);
        }
    }
}

TEST(Policy, SamplesAreAlwaysValid) {
    const auto p = Policy::init(5, PolicyConfig{}, 7);
    const PolicySnapshot snap(p);
    Rng rng(8);
    for (int k = 0; k < 300; ++k) {
        const auto s = snap.sample_sequence(rng, k % 3 == 0 ? 3.0 : 1.0);
        ASSERT_TRUE(s.is_terminal()) << to_text(s);
        ASSERT_NO_THROW(parse(s));
    }
    const auto g = snap.sample_sequence(rng, 1.0, true);
    EXPECT_EQ(g, snap.sample_sequence(rng, 1.0, true));
}

TEST(Policy, TrainingLowersLossDeterministically) {
    const auto entries = distinct_walks(20, 3, 11);
    auto a = Policy::init(3, PolicyConfig{}, 12);
    auto b = a;
    const double before = policy_loss(a, entries);
    TrainConfig tc;
    tc.epochs = 30;
    const auto hist = train_policy(a, entries, tc, 13);
    ASSERT_EQ(hist.size(), 30u);
    EXPECT_LT(policy_loss(a, entries), 0.85 * before);
    EXPECT_LT(hist.back(), hist.front());
    train_policy(b, entries, tc, 13);
    EXPECT_TRUE(a == b);
}

TEST(Policy, InitIsSeeded) {
    EXPECT_TRUE(Policy::init(3, PolicyConfig{}, 1) == Policy::init(3, PolicyConfig{}, 1));
    EXPECT_FALSE(Policy::init(3, PolicyConfig{}, 1) == Policy::init(3, PolicyConfig{}, 2));
}

TEST(Policy, RejectsInvalidTrainingSequences) {
    const auto p = Policy::init(2, PolicyConfig{}, 1);
    EXPECT_THROW(p.examples(TokenSequence(std::vector<Token>{Token::chan(0), Token::plus(), Token::end()})),
                 ContractError);
    EXPECT_THROW(p.examples(TokenSequence(tokenize("c0+c3="))), ContractError);
    std::vector<TokenSequence> none;
    auto q = p;
    EXPECT_THROW(train_policy(q, none, TrainConfig{}, 1), ContractError);
}

TEST(Checkpoint, RoundTripIsExact) {
    testsupport::TempDir dir("ckpt");
    auto p = Policy::init(6, PolicyConfig{}, 77);
    train_policy(p, distinct_walks(5, 6, 1), TrainConfig{}, 2);
    save_policy(p, dir / "p.ckpt");
    const auto q = load_policy(dir / "p.ckpt");
    EXPECT_TRUE(p == q);
    EXPECT_EQ(q.config().max_len, kDefaultMaxLen);
    const auto t = tokenize("c0+c5");
    EXPECT_EQ(p.logits(t), q.logits(t));
}

TEST(Checkpoint, CorruptFilesAreRejected) {
    testsupport::TempDir dir("ckpt");
    const auto p = Policy::init(2, PolicyConfig{}, 1);
    save_policy(p, dir / "p.ckpt");
    auto bytes = testsupport::read_file(dir / "p.ckpt");
    {
        auto b = bytes;
        b[0] = 'X';
        std::ofstream(dir / "bad.ckpt", std::ios::binary) << b;
        EXPECT_THROW(load_policy(dir / "bad.ckpt"), DataError);
    }
    {
        std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 10);
        EXPECT_THROW(load_policy(dir / "short.ckpt"), DataError);
    }
    EXPECT_THROW(load_policy(dir / "absent.ckpt"), DataError);
}
