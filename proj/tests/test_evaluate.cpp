#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "support.hpp"

using namespace indexforge;

namespace {

std::vector<double> pixel_of(const Image& img, std::size_t p) {
    std::vector<double> px(img.channels);
    for (std::size_t k = 0; k < img.channels; ++k) px[k] = img.channel(k)[p];
    return px;
}

}  // namespace

TEST(Evaluate, MatchesScalarInterpreter) {
    Rng rng(21);
    std::size_t compared = 0;
    for (int e = 0; e < 300; ++e) {
        const auto s = testsupport::random_walk(rng, 4);
        const auto img = testsupport::random_image(rng, 4, 8, 8, -0.2, 1.0);
        const auto got = evaluate_raw(parse(s), img);
        const testsupport::ScalarInterpreter oracle(s.tokens());
        for (std::size_t p = 0; p < img.pixels(); ++p) {
            const float want = static_cast<float>(oracle(pixel_of(img, p)));
            if (std::isnan(want)) {
                ASSERT_TRUE(std::isnan(got[p])) << to_text(s);
                continue;
            }
            if (std::isinf(want)) {
                ASSERT_EQ(got[p], want) << to_text(s);
                continue;
            }
            ASSERT_NEAR(got[p], want, 1e-6 * std::max(1.0f, std::abs(want))) << to_text(s);
            ++compared;
        }
    }
    EXPECT_GT(compared, 10000u);
}

TEST(Evaluate, NdviByHand) {
    Image img(2, 1, 3);
    const float nir[] = {0.8f, 0.5f, 0.1f}, red[] = {0.2f, 0.5f, 0.3f};
    std::copy(nir, nir + 3, img.channel(0).begin());
    std::copy(red, red + 3, img.channel(1).begin());
    const auto v = evaluate_raw(parse_text("(c0-c1)/(c0+c1)"), img);
    for (int i = 0; i < 3; ++i)
        EXPECT_EQ(v[i], static_cast<float>((double(nir[i]) - red[i]) / (double(nir[i]) + red[i])));
}

TEST(Evaluate, NonFiniteValuesAreKept) {
    Image img(2, 1, 2);
    img.channel(0)[0] = 1.0f;
    img.channel(0)[1] = -1.0f;
    const auto d = evaluate_raw(parse_text("c0/c1"), img);
    EXPECT_TRUE(std::isinf(d[0]));
    const auto s = evaluate_raw(parse_text("sqrt(c0)"), img);
    EXPECT_TRUE(std::isnan(s[1]));
}

TEST(Evaluate, ChannelOutOfRange) {
    Image img(2, 2, 2, 0.5f);
    EXPECT_THROW(evaluate_raw(parse_text("c0+c2"), img), EvaluationError);
}

TEST(Normalize, MatchesDirectFormula) {
    Rng rng(4);
    std::vector<float> raw(64);
    for (auto& v : raw) v = static_cast<float>(rng.normal() * 3.0 + 1.0);
    raw[5] = 40.0f;  // clipped
    const auto out = normalize(raw, 8, 8);
    long double m = 0;
    for (float v : raw) m += v;
    m /= raw.size();
    long double ss = 0;
    for (float v : raw) ss += (v - m) * (v - m);
    const long double sd = std::sqrt(ss / raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        long double z = (raw[i] - m) / sd;
        z = std::min<long double>(3, std::max<long double>(-3, z));
        EXPECT_NEAR(out.values[i], static_cast<double>((z + 3) / 6), 1e-6);
        EXPECT_GE(out.values[i], 0.0f);
        EXPECT_LE(out.values[i], 1.0f);
    }
    EXPECT_EQ(out.values[5], 1.0f);
    EXPECT_NEAR(out.mean, static_cast<double>(m), 1e-9);
}

TEST(Normalize, ConstantPlaneIsHalf) {
    std::vector<float> raw(16, 2.5f);
    const auto out = normalize(raw, 4, 4);
    for (float v : out.values) EXPECT_EQ(v, 0.5f);
    EXPECT_EQ(out.stddev, 0.0);
}

TEST(Normalize, DegenerateThreshold) {
    std::vector<float> raw(20);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(i);
    raw[0] = std::numeric_limits<float>::infinity();
    raw[1] = std::numeric_limits<float>::quiet_NaN();
    const auto ok = normalize(raw, 4, 5);  // exactly 10%
    EXPECT_EQ(ok.values[0], 0.5f);
    EXPECT_EQ(ok.values[1], 0.5f);
    EXPECT_DOUBLE_EQ(ok.degenerate_fraction, 0.1);
    raw[2] = -std::numeric_limits<float>::infinity();
    try {
        normalize(raw, 4, 5);
        FAIL();
    } catch (const DegenerateIndex& e) {
        EXPECT_DOUBLE_EQ(e.fraction(), 0.15);
    }
}

TEST(Normalize, ShapeContract) {
    std::vector<float> raw(6, 1.0f);
    EXPECT_THROW(normalize(raw, 2, 2), ContractError);
    EXPECT_THROW(normalize(std::vector<float>{}, 0, 0), ContractError);
}

TEST(Normalize, EvaluateIndexComposes) {
    Rng rng(8);
    const auto img = testsupport::random_image(rng, 3, 6, 6);
    const auto tree = parse_text("c0*c1-c2");
    const auto a = evaluate_index(tree, img);
    const auto b = normalize(evaluate_raw(tree, img), 6, 6);
    EXPECT_EQ(a.values, b.values);
}
