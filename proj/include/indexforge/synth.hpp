#pragma once

/**
 * Synthetic few-shot datasets with a planted index.
 *
 * Each image is a two-class scene: a smooth latent field thresholded into
 * a hard class map, one random spectrum per class, a smooth illumination
 * field shared by all channels and a per-channel multiplicative texture
 * that spreads each class spectrum, so no index is exactly two-valued. The mask is
 * the planted expression's normalized clean index thresholded at theta;
 * Gaussian noise is added to the channels afterwards.
 *
 * Scenes where the planted index separates the classes weakly are
 * redrawn, so the mask is recoverable from the noise-free index.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "indexforge/dataset.hpp"
#include "indexforge/error.hpp"
#include "indexforge/evaluate.hpp"
#include "indexforge/expr.hpp"
#include "indexforge/parallel.hpp"
#include "indexforge/rng.hpp"

namespace indexforge {

struct SynthConfig {
    std::size_t n_channels = 3;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t n_train = 20;
    std::size_t n_val = 10;
    std::size_t n_test = 20;
    std::string target = "(c0-c1)/(c0+c1)=";
    double theta = 0.6;
    double sigma = 0.05;
    std::uint64_t seed = 7;
    std::size_t max_attempts = 100;
    // Scene acceptance: correlation of the planted index with the class map.
    double min_clean_separation = 0.85;
    double min_noisy_separation = 0.7;
    double texture = 0.3;  // amplitude of the per-channel multiplicative texture

    void validate() const {
        if (n_channels == 0) throw ContractError("synth needs at least one channel");
        if (height == 0 || width == 0) throw ContractError("synth image size must be positive");
        if (n_train == 0 || n_val == 0 || n_test == 0) throw ContractError("every split needs at least one sample");
        if (!(sigma >= 0.0)) throw ContractError("sigma must be non-negative");
        if (!(theta > 0.0 && theta < 1.0)) throw ContractError("theta must lie in (0, 1)");
        if (max_attempts == 0) throw ContractError("max_attempts must be positive");
        if (!(texture >= 0.0 && texture < 1.0)) throw ContractError("texture must lie in [0, 1)");
    }
};

namespace detail {

/// Mixture of four random plane waves, rescaled to [-1, 1].
inline std::vector<double> smooth_field(Rng& rng, std::size_t h, std::size_t w) {
    std::vector<double> f(h * w, 0.0);
    for (int k = 0; k < 4; ++k) {
        const double fx = rng.uniform(-2.5, 2.5);
        const double fy = rng.uniform(-2.5, 2.5);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double amp = rng.uniform(0.5, 1.0);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                f[y * w + x] += amp * std::sin(2.0 * std::numbers::pi *
                                                   (fx * static_cast<double>(x) / static_cast<double>(w) +
                                                    fy * static_cast<double>(y) / static_cast<double>(h)) +
                                               phase);
    }
    const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
    const double a = *lo, b = *hi;
    for (auto& v : f) v = b > a ? 2.0 * (v - a) / (b - a) - 1.0 : 0.0;
    return f;
}

struct Separation {
    double correlation = 0.0;   // point-biserial correlation of index and class map
    bool class_higher = false;  // class-1 pixels have the larger mean index
};

inline Separation separation(const std::vector<float>& index, const std::vector<std::uint8_t>& cls) {
    double s1 = 0.0, s0 = 0.0;
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (!std::isfinite(index[i])) return {};
        if (cls[i]) {
            s1 += index[i];
            ++n1;
        } else {
            s0 += index[i];
            ++n0;
        }
    }
    if (n1 < 10 || n0 < 10) return {};
    const double n = static_cast<double>(index.size());
    const double m1 = s1 / static_cast<double>(n1), m0 = s0 / static_cast<double>(n0);
    const double m = (s1 + s0) / n;
    double ss = 0.0;
    for (float v : index) ss += (v - m) * (v - m);
    if (ss <= 0.0) return {};
    const double f = static_cast<double>(n1) / n;
    const double r = std::abs(m1 - m0) * std::sqrt(f * (1.0 - f)) / std::sqrt(ss / n);
    return {r, m1 > m0};
}

inline Image render_scene(const std::vector<std::uint8_t>& cls, const std::vector<double>& fg,
                          const std::vector<double>& bg, const std::vector<double>& illum,
                          const std::vector<std::vector<double>>& texture, std::size_t h, std::size_t w) {
    Image img(fg.size(), h, w);
    for (std::size_t k = 0; k < fg.size(); ++k) {
        auto plane = img.channel(k);
        for (std::size_t p = 0; p < h * w; ++p)
            plane[p] = static_cast<float>((cls[p] ? fg[k] : bg[k]) * illum[p] * texture[k][p]);
    }
    return img;
}

inline ImageSample synth_sample(const SynthConfig& cfg, const CompiledExpr& target, std::uint64_t seed,
                                std::size_t index) {
    Rng rng(seed);
    const std::size_t h = cfg.height, w = cfg.width, n = h * w, C = cfg.n_channels;
    for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        const auto latent = smooth_field(rng, h, w);
        const double offset = rng.uniform(-0.5, 0.5);
        std::vector<std::uint8_t> cls(n);
        for (std::size_t p = 0; p < n; ++p) cls[p] = latent[p] > offset;
        std::vector<double> fg(C), bg(C);
        for (auto& v : fg) v = rng.uniform(0.1, 0.75);
        for (auto& v : bg) v = rng.uniform(0.1, 0.75);
        auto illum = smooth_field(rng, h, w);
        for (auto& v : illum) v = 1.0 + 0.2 * v;
        std::vector<std::vector<double>> texture(C);
        for (auto& t : texture) {
            t = smooth_field(rng, h, w);
            for (auto& v : t) v = 1.0 + cfg.texture * v;
        }

        Image clean = render_scene(cls, fg, bg, illum, texture, h, w);
        const auto first = separation(target.evaluate(clean), cls);
        if (first.correlation == 0.0) continue;
        std::size_t ones = 0;
        for (auto c : cls) ones += c;
        // Vary which side of the boundary carries the high index.
        if (first.class_higher == (static_cast<double>(ones) / static_cast<double>(n) > 0.6)) {
            for (auto& c : cls) c = !c;
            clean = render_scene(cls, fg, bg, illum, texture, h, w);
        }

        Image noisy = clean;
        if (cfg.sigma > 0.0)
            for (auto& v : noisy.values) v = static_cast<float>(v + cfg.sigma * rng.normal());

        const auto clean_index = target.evaluate(clean);
        if (separation(clean_index, cls).correlation < cfg.min_clean_separation) continue;
        if (separation(target.evaluate(noisy), cls).correlation < cfg.min_noisy_separation) continue;

        EvaluatedIndex idx;
        try {
            idx = normalize(clean_index, h, w);
        } catch (const DegenerateIndex&) {
            continue;
        }
        ImageSample s;
        s.image = std::move(noisy);
        s.mask.resize(n);
        std::size_t fg_count = 0;
        for (std::size_t p = 0; p < n; ++p) fg_count += s.mask[p] = idx.values[p] > cfg.theta;
        const double frac = static_cast<double>(fg_count) / static_cast<double>(n);
        if (!(frac > 0.05 && frac < 0.95)) continue;
        return s;
    }
    throw DataError("synth: sample " + std::to_string(index) + " failed the scene checks in " +
                    std::to_string(cfg.max_attempts) + " attempts");
}

}  // namespace detail

/// Deterministic per seed; samples are generated concurrently from
/// per-sample sub-seeds. Splits are train, then val, then test.
inline Dataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    const ExprTree tree = parse_text(cfg.target);
    const CompiledExpr target(tree);
    if (target.channel_span() > cfg.n_channels)
        throw ContractError("target expression uses channel c" + std::to_string(target.channel_span() - 1) +
                            " but only " + std::to_string(cfg.n_channels) + " channels are generated");
    Dataset ds;
    ds.n_channels = cfg.n_channels;
    const std::size_t total = cfg.n_train + cfg.n_val + cfg.n_test;
    ds.samples.resize(total);
    parallel_for(total, [&](std::size_t i) {
        ds.samples[i] = detail::synth_sample(cfg, target, derive_seed(cfg.seed, {i}), i);
        ds.samples[i].split = i < cfg.n_train ? Split::Train : i < cfg.n_train + cfg.n_val ? Split::Val : Split::Test;
    });
    return ds;
}

}  // namespace indexforge
