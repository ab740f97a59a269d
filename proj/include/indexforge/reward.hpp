#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "indexforge/dataset.hpp"
#include "indexforge/error.hpp"
#include "indexforge/evaluate.hpp"
#include "indexforge/expr.hpp"
#include "indexforge/metrics.hpp"
#include "indexforge/rng.hpp"
#include "indexforge/token.hpp"

namespace indexforge {

/// How f(I, M) and f(1 - I, M) are merged into one score.
enum class CombinerKind : std::uint8_t {
    MinLiteral,      // min(score, score')
    OrientationMax,  // max(score, score')
};

inline std::string to_string(CombinerKind c) { return c == CombinerKind::MinLiteral ? "min" : "max"; }

inline CombinerKind parse_combiner(const std::string& s) {
    if (s == "min") return CombinerKind::MinLiteral;
    if (s == "max") return CombinerKind::OrientationMax;
    throw ContractError("unknown combiner '" + s + "' (expected min or max)");
}

struct RewardConfig {
    MetricSpec metric;
    CombinerKind combiner = CombinerKind::OrientationMax;
    std::size_t sample_cap = 0;  // 0 means every sample
    NormalizeConfig normalize;

    void validate() const { metric.validate(); }
};

inline double combine(double score, double complement_score, CombinerKind c) noexcept {
    return c == CombinerKind::MinLiteral ? std::min(score, complement_score) : std::max(score, complement_score);
}

/// Combined score of one evaluated plane against its mask.
inline double combined_score(std::span<const float> index, std::span<const std::uint8_t> mask,
                             const RewardConfig& cfg) {
    const double a = metric_score(index, mask, cfg.metric, false).value;
    const double b = metric_score(index, mask, cfg.metric, true).value;
    return combine(a, b, cfg.combiner);
}

/// Mean combined score over the first min(|samples|, sample_cap) samples.
/// Propagates DegenerateIndex from any sample.
inline double heuristic_reward(const CompiledExpr& expr, std::span<const ImageSample> samples,
                               const RewardConfig& cfg) {
    if (samples.empty()) throw ContractError("heuristic_reward needs at least one sample");
    const std::size_t n = cfg.sample_cap == 0 ? samples.size() : std::min(samples.size(), cfg.sample_cap);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto idx = evaluate_index(expr, samples[i].image, cfg.normalize);
        total += combined_score(idx.values, samples[i].mask, cfg);
    }
    return total / static_cast<double>(n);
}

inline double heuristic_reward(const ExprTree& tree, std::span<const ImageSample> samples, const RewardConfig& cfg) {
    return heuristic_reward(CompiledExpr(tree), samples, cfg);
}

/// 0 while the episode runs, -1 for an invalid end state, the heuristic otherwise.
inline double episode_reward(const TokenSequence& state, std::span<const ImageSample> samples,
                             const RewardConfig& cfg) {
    if (!state.is_terminal()) return state.is_truncated() ? -1.0 : 0.0;
    try {
        return heuristic_reward(parse(state), samples, cfg);
    } catch (const ParseError&) {
        return -1.0;
    } catch (const DegenerateIndex&) {
        return -1.0;
    } catch (const EvaluationError&) {
        return -1.0;
    }
}

/// True when the expression evaluates to a finite value on one pixel with
/// every channel at 0.5.
inline bool probe_valid(const ExprTree& tree) {
    const std::size_t channels = std::max<std::size_t>(1, *tree.channels().rbegin() + 1);
    const Image pixel(channels, 1, 1, 0.5f);
    return std::isfinite(CompiledExpr(tree).evaluate(pixel)[0]);
}

/// Dataset-free shaping reward used to pretrain the policy.
inline double pretrain_reward(const TokenSequence& state) {
    if (!state.is_terminal()) return state.is_truncated() ? -1.0 : 0.0;
    ExprTree tree = ExprTree::channel(0);
    try {
        tree = parse(state);
    } catch (const ParseError&) {
        return -1.0;
    }
    if (!probe_valid(tree)) return -1.0;
    std::size_t length = 0;
    std::size_t pairs = 0;
    for (auto t : state.tokens()) {
        length += t.kind != TokenKind::End;
        pairs += t.kind == TokenKind::LParen;
    }
    const double r_unit = unit_exponent(tree).is_unitless() ? 1.0 : 0.0;
    return 0.5 + 0.02 * static_cast<double>(length) + 0.2 * static_cast<double>(pairs) + r_unit;
}

struct ProxyConfig {
    std::size_t steps = 500;
    double step_size = 0.1;
    NormalizeConfig normalize;
};

struct ProxyFit {
    double scale = 0.0;  // on the standardized feature
    double bias = 0.0;
    double feature_mean = 0.0;
    double feature_sd = 0.0;
    double iou = 0.0;
    bool degenerate = false;

    bool predict(double x) const noexcept {
        if (feature_sd <= 0.0) return false;
        return scale * (x - feature_mean) / feature_sd + bias > 0.0;
    }
};

namespace detail {

struct Pooled {
    std::vector<double> x;
    std::vector<std::uint8_t> y;
};

inline Pooled pool(const CompiledExpr& expr, std::span<const ImageSample> samples, Split split,
                   const NormalizeConfig& norm) {
    Pooled p;
    for (const auto& s : samples) {
        if (s.split != split) continue;
        const auto idx = evaluate_index(expr, s.image, norm);
        p.x.insert(p.x.end(), idx.values.begin(), idx.values.end());
        p.y.insert(p.y.end(), s.mask.begin(), s.mask.end());
    }
    return p;
}

}  // namespace detail

/// Fits a per-pixel logistic regression on pooled train pixels of a
/// one-feature problem and scores its p > 0.5 prediction by IoU on val.
inline ProxyFit fit_proxy(std::span<const double> train_x, std::span<const std::uint8_t> train_y,
                          std::span<const double> val_x, std::span<const std::uint8_t> val_y, std::uint64_t seed,
                          const ProxyConfig& cfg = {}) {
    if (train_x.empty() || val_x.empty()) throw ContractError("proxy reward needs train and val pixels");
    ProxyFit fit;
    const double n = static_cast<double>(train_x.size());
    double sum = 0.0;
    for (double v : train_x) sum += v;
    fit.feature_mean = sum / n;
    double ss = 0.0;
    for (double v : train_x) ss += (v - fit.feature_mean) * (v - fit.feature_mean);
    fit.feature_sd = std::sqrt(ss / n);

    if (fit.feature_sd > 0.0) {
        std::size_t npos = 0;
        for (auto y : train_y) npos += y != 0;
        const std::size_t nneg = train_y.size() - npos;
        const double w_pos = npos ? n / (2.0 * static_cast<double>(npos)) : 1.0;
        const double w_neg = nneg ? n / (2.0 * static_cast<double>(nneg)) : 1.0;

        std::vector<double> xs(train_x.size());
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = (train_x[i] - fit.feature_mean) / fit.feature_sd;

        Rng rng(seed);
        double th[2] = {rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01)};
        double m[2] = {0.0, 0.0};
        double v[2] = {0.0, 0.0};
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        double b1t = 1.0, b2t = 1.0;
        for (std::size_t step = 0; step < cfg.steps; ++step) {
            double g0 = 0.0, g1 = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const double z = th[0] * xs[i] + th[1];
                const double p = 1.0 / (1.0 + std::exp(-z));
                const double g = train_y[i] ? w_pos * (p - 1.0) : w_neg * p;
                g0 += g * xs[i];
                g1 += g;
            }
            const double grad[2] = {g0 / n, g1 / n};
            b1t *= b1;
            b2t *= b2;
            for (int k = 0; k < 2; ++k) {
                m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
                v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
                th[k] -= cfg.step_size * (m[k] / (1.0 - b1t)) / (std::sqrt(v[k] / (1.0 - b2t)) + eps);
            }
        }
        fit.scale = th[0];
        fit.bias = th[1];
    }

    Confusion c;
    for (std::size_t i = 0; i < val_x.size(); ++i) {
        const bool pred = fit.predict(val_x[i]);
        const bool truth = val_y[i] != 0;
        if (pred && truth) ++c.tp;
        else if (pred) ++c.fp;
        else if (truth) ++c.fn;
        else ++c.tn;
    }
    fit.iou = iou_from(c).value;
    return fit;
}

/// Desk-scale stand-in for "train a segmentation model on the index alone".
/// A degenerate index scores 0.
inline ProxyFit proxy_fit(const CompiledExpr& expr, const Dataset& dataset, std::uint64_t seed,
                          const ProxyConfig& cfg = {}) {
    if (dataset.count(Split::Train) == 0 || dataset.count(Split::Val) == 0)
        throw ContractError("proxy reward needs at least one train and one val sample");
    detail::Pooled train, val;
    try {
        train = detail::pool(expr, dataset.samples, Split::Train, cfg.normalize);
        val = detail::pool(expr, dataset.samples, Split::Val, cfg.normalize);
    } catch (const DegenerateIndex&) {
        ProxyFit f;
        f.degenerate = true;
        return f;
    }
    return fit_proxy(train.x, train.y, val.x, val.y, seed, cfg);
}

inline double proxy_training_reward(const ExprTree& tree, const Dataset& dataset, std::uint64_t seed,
                                    const ProxyConfig& cfg = {}) {
    return proxy_fit(CompiledExpr(tree), dataset, seed, cfg).iou;
}

}  // namespace indexforge
