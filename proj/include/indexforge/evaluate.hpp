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
#include "indexforge/expr.hpp"

namespace indexforge {

/// Knobs of the standardize-clip-rescale step.
struct NormalizeConfig {
    double clip_k = 3.0;
    double nonfinite_fill = 0.5;
    double degenerate_threshold = 0.10;
};

/// A single-channel plane in [0, 1] derived from an expression and an image.
struct EvaluatedIndex {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;
    double degenerate_fraction = 0.0;
    double mean = 0.0;    // over finite raw pixels
    double stddev = 0.0;  // population, over finite raw pixels
};

/// Postfix program compiled from a tree, evaluated plane-at-a-time.
class CompiledExpr {
public:
    explicit CompiledExpr(const ExprTree& tree) {
        emit(tree);
        for (const auto& ins : program_)
            if (ins.op == Op::Channel) channel_span_ = std::max<std::size_t>(channel_span_, ins.channel + 1);
    }

    /// Highest channel index used, plus one.
    std::size_t channel_span() const noexcept { return channel_span_; }

    /// Pixel-wise evaluation in double precision, rounded to float at the end.
    /// Non-finite results (x/0, sqrt of a negative) are kept.
    std::vector<float> evaluate(const Image& image) const {
        if (channel_span_ > image.channels)
            throw EvaluationError("expression uses channel c" + std::to_string(channel_span_ - 1) + " but image has " +
                                  std::to_string(image.channels) + " channels");
        const std::size_t n = image.pixels();
        std::vector<std::vector<double>> stack;
        stack.reserve(program_.size());
        for (const auto& ins : program_) {
            switch (ins.op) {
                case Op::Channel: {
                    const auto src = image.channel(ins.channel);
                    stack.emplace_back(src.begin(), src.end());
                    break;
                }
                case Op::Square: {
                    auto& a = stack.back();
                    for (auto& v : a) v = v * v;
                    break;
                }
                case Op::Sqrt: {
                    auto& a = stack.back();
                    for (auto& v : a) v = std::sqrt(v);
                    break;
                }
                default: {
                    std::vector<double> rhs = std::move(stack.back());
                    stack.pop_back();
                    auto& lhs = stack.back();
                    switch (ins.op) {
                        case Op::Add:
                            for (std::size_t i = 0; i < n; ++i) lhs[i] += rhs[i];
                            break;
                        case Op::Sub:
                            for (std::size_t i = 0; i < n; ++i) lhs[i] -= rhs[i];
                            break;
                        case Op::Mul:
                            for (std::size_t i = 0; i < n; ++i) lhs[i] *= rhs[i];
                            break;
                        default:
                            for (std::size_t i = 0; i < n; ++i) lhs[i] /= rhs[i];
                            break;
                    }
                }
            }
        }
        std::vector<float> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(stack.back()[i]);
        return out;
    }

private:
    struct Instruction {
        Op op;
        std::uint32_t channel;
    };

    void emit(const ExprTree& t) {
        if (t.is_channel()) {
            program_.push_back({Op::Channel, t.channel_index()});
            return;
        }
        if (is_unary(t.op())) {
            emit(t.child());
        } else {
            emit(t.lhs());
            emit(t.rhs());
        }
        program_.push_back({t.op(), 0});
    }

    std::vector<Instruction> program_;
    std::size_t channel_span_ = 0;
};

inline std::vector<float> evaluate_raw(const ExprTree& tree, const Image& image) {
    return CompiledExpr(tree).evaluate(image);
}

/// Standardizes over finite pixels, clips z to [-k, k] and maps to [0, 1].
/// Non-finite pixels take the fill value; a zero-variance plane is all 0.5.
/// Throws DegenerateIndex when the non-finite share exceeds the threshold.
inline EvaluatedIndex normalize(std::span<const float> raw, std::size_t height, std::size_t width,
                                const NormalizeConfig& cfg = {}) {
    if (raw.empty()) throw ContractError("normalize: empty plane");
    if (raw.size() != height * width) throw ContractError("normalize: plane size does not match shape");
    EvaluatedIndex out;
    out.height = height;
    out.width = width;

    std::size_t finite = 0;
    double sum = 0.0;
    for (float v : raw)
        if (std::isfinite(v)) {
            ++finite;
            sum += v;
        }
    out.degenerate_fraction = static_cast<double>(raw.size() - finite) / static_cast<double>(raw.size());
    if (out.degenerate_fraction > cfg.degenerate_threshold)
        throw DegenerateIndex(out.degenerate_fraction,
                              "evaluated index has " + std::to_string(raw.size() - finite) + " non-finite pixels of " +
                                  std::to_string(raw.size()));
    if (finite > 0) {
        out.mean = sum / static_cast<double>(finite);
        double ss = 0.0;
        for (float v : raw)
            if (std::isfinite(v)) ss += (v - out.mean) * (v - out.mean);
        out.stddev = std::sqrt(ss / static_cast<double>(finite));
    }

    out.values.resize(raw.size());
    const double k = cfg.clip_k;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const float v = raw[i];
        if (!std::isfinite(v)) {
            out.values[i] = static_cast<float>(cfg.nonfinite_fill);
        } else if (out.stddev == 0.0) {
            out.values[i] = 0.5f;
        } else {
            double z = (v - out.mean) / out.stddev;
            z = std::clamp(z, -k, k);
            out.values[i] = static_cast<float>((z + k) / (2.0 * k));
        }
    }
    return out;
}

/// evaluate_raw followed by normalize.
inline EvaluatedIndex evaluate_index(const CompiledExpr& expr, const Image& image, const NormalizeConfig& cfg = {}) {
    const auto raw = expr.evaluate(image);
    return normalize(raw, image.height, image.width, cfg);
}

inline EvaluatedIndex evaluate_index(const ExprTree& tree, const Image& image, const NormalizeConfig& cfg = {}) {
    return evaluate_index(CompiledExpr(tree), image, cfg);
}

}  // namespace indexforge
