#include <gtest/gtest.h>

#include "support.hpp"

using namespace indexforge;

namespace {

SynthConfig small() {
    SynthConfig c;
    c.n_train = 6;
    c.n_val = 3;
    c.n_test = 3;
    c.height = c.width = 24;
    return c;
}

}  // namespace

TEST(Synth, ShapesAndSplits) {
    const auto ds = generate_synthetic(small());
    EXPECT_EQ(ds.n_channels, 3u);
    EXPECT_EQ(ds.count(Split::Train), 6u);
    EXPECT_EQ(ds.count(Split::Val), 3u);
    EXPECT_EQ(ds.count(Split::Test), 3u);
    EXPECT_EQ(ds.samples[0].split, Split::Train);
    EXPECT_EQ(ds.samples[11].split, Split::Test);
    EXPECT_NO_THROW(ds.validate());
    for (const auto& s : ds.samples) {
        std::size_t fg = 0;
        for (auto m : s.mask) fg += m;
        const double frac = static_cast<double>(fg) / static_cast<double>(s.mask.size());
        EXPECT_GT(frac, 0.05);
        EXPECT_LT(frac, 0.95);
    }
}

TEST(Synth, DeterministicPerSeed) {
    const auto a = generate_synthetic(small());
    const auto b = generate_synthetic(small());
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        EXPECT_EQ(a.samples[i].image, b.samples[i].image);
        EXPECT_EQ(a.samples[i].mask, b.samples[i].mask);
    }
    auto c = small();
    c.seed = 8;
    EXPECT_FALSE(generate_synthetic(c).samples[0].image == a.samples[0].image);
}

TEST(Synth, NoiseFreeMaskIsThresholdedPlantedIndex) {
    auto c = small();
    c.sigma = 0.0;
    const auto ds = generate_synthetic(c);
    const auto tree = parse_text(c.target);
    for (const auto& s : ds.samples) {
        const auto idx = evaluate_index(tree, s.image);
        for (std::size_t p = 0; p < s.mask.size(); ++p) ASSERT_EQ(s.mask[p], idx.values[p] > c.theta ? 1 : 0);
    }
}

TEST(Synth, PlantedIndexBeatsRawChannels) {
    const auto c = small();
    const auto ds = generate_synthetic(c);
    const auto train = ds.subset(Split::Train);
    RewardConfig rc;
    const double planted = heuristic_reward(parse_text(c.target), train, rc);
    // Within-class texture keeps the index continuous, which caps the
    // point-biserial correlation with its own thresholded mask well below 1.
    EXPECT_GT(planted, 0.75);
    for (const char* e : {"c0", "c1", "c2"}) EXPECT_LT(heuristic_reward(parse_text(e), train, rc), planted) << e;
}

TEST(Synth, NoiseFreePlantedIndexIsFullyLearnable) {
    auto c = small();
    c.sigma = 0.0;
    const auto ds = generate_synthetic(c);
    // The best pooled threshold is exact here; the proxy lands within its fitting margin.
    EXPECT_GT(proxy_training_reward(parse_text(c.target), ds, 1), 0.95);
    EXPECT_LT(proxy_training_reward(parse_text("c2"), ds, 1), 0.9);
}

TEST(Synth, OtherTargetsAndChannelCounts) {
    auto c = small();
    c.n_channels = 5;
    c.target = "c3/(c1+c4)";
    const auto ds = generate_synthetic(c);
    EXPECT_EQ(ds.n_channels, 5u);
    EXPECT_GT(heuristic_reward(parse_text(c.target), ds.subset(Split::Train), RewardConfig{}), 0.7);
}

TEST(Synth, Contracts) {
    auto c = small();
    c.n_channels = 1;
    EXPECT_THROW(generate_synthetic(c), ContractError);
    c = small();
    c.theta = 1.0;
    EXPECT_THROW(generate_synthetic(c), ContractError);
    c = small();
    c.n_val = 0;
    EXPECT_THROW(generate_synthetic(c), ContractError);
    c = small();
    c.target = "c0+";
    EXPECT_THROW(generate_synthetic(c), ParseError);
}
