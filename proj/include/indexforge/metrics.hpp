#pragma once

/**
 * Similarity between an evaluated index plane and a binary mask.
 *
 * Every metric can be computed on the complement plane (1 - I) without
 * materializing it; the complement is formed in double so it is exact.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "indexforge/error.hpp"

namespace indexforge {

enum class MetricKind : std::uint8_t { F1, AUC, CS, IoU, PCC };

inline constexpr MetricKind kAllMetrics[] = {MetricKind::F1, MetricKind::AUC, MetricKind::CS, MetricKind::IoU,
                                             MetricKind::PCC};

inline std::string to_string(MetricKind m) {
    switch (m) {
        case MetricKind::F1: return "f1";
        case MetricKind::AUC: return "auc";
        case MetricKind::CS: return "cs";
        case MetricKind::IoU: return "iou";
        case MetricKind::PCC: return "pcc";
    }
    return "?";
}

inline MetricKind parse_metric(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "f1") return MetricKind::F1;
    if (s == "auc") return MetricKind::AUC;
    if (s == "cs") return MetricKind::CS;
    if (s == "iou") return MetricKind::IoU;
    if (s == "pcc") return MetricKind::PCC;
    throw ContractError("unknown metric '" + s + "' (expected f1, auc, cs, iou or pcc)");
}

struct MetricSpec {
    MetricKind kind = MetricKind::PCC;
    double threshold = 0.5;             // F1, IoU, and AUC in single-threshold mode
    bool auc_single_threshold = false;  // AUC of the one-point ROC, i.e. balanced accuracy

    void validate() const {
        if (!(threshold > 0.0 && threshold < 1.0)) throw ContractError("metric threshold must lie in (0, 1)");
    }
};

struct MetricResult {
    double value = 0.0;
    bool degenerate = false;  // statistic undefined for this input; value is 0
};

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

namespace detail {

inline double plane_value(float v, bool complement) noexcept {
    return complement ? 1.0 - static_cast<double>(v) : static_cast<double>(v);
}

inline double auc_rank(std::span<const float> index, std::span<const std::uint8_t> mask, bool complement,
                       bool& degenerate) {
    const std::size_t n = index.size();
    std::size_t npos = 0;
    for (auto m : mask) npos += m != 0;
    const std::size_t nneg = n - npos;
    if (npos == 0 || nneg == 0) {
        degenerate = true;
        return 0.0;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = plane_value(index[i], complement);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    // Sum of 1-based mid-ranks of the positives, doubled to stay integral.
    std::uint64_t rank2_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && vals[order[j]] == vals[order[i]]) ++j;
        const std::uint64_t mid2 = static_cast<std::uint64_t>(i + 1 + j);  // 2 * (i+1 + j) / 2
        for (std::size_t k = i; k < j; ++k)
            if (mask[order[k]]) rank2_pos += mid2;
        i = j;
    }
    const double u2 = static_cast<double>(rank2_pos) - static_cast<double>(npos) * static_cast<double>(npos + 1);
    return u2 / (2.0 * static_cast<double>(npos) * static_cast<double>(nneg));
}

}  // namespace detail

/// Confusion counts of (index > threshold) against the mask.
inline Confusion confusion(std::span<const float> index, std::span<const std::uint8_t> mask, double threshold,
                           bool complement = false) {
    if (index.size() != mask.size()) throw ContractError("index and mask sizes differ");
    Confusion c;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const bool pred = detail::plane_value(index[i], complement) > threshold;
        const bool truth = mask[i] != 0;
        if (pred && truth) ++c.tp;
        else if (pred) ++c.fp;
        else if (truth) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline MetricResult iou_from(const Confusion& c) {
    const std::size_t denom = c.tp + c.fp + c.fn;
    if (denom == 0) return {0.0, true};
    return {static_cast<double>(c.tp) / static_cast<double>(denom), false};
}

inline MetricResult f1_from(const Confusion& c) {
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return {0.0, true};
    return {static_cast<double>(2 * c.tp) / static_cast<double>(denom), false};
}

/// f(I, M) for one metric; with complement set, f(1 - I, M).
inline MetricResult metric_score(std::span<const float> index, std::span<const std::uint8_t> mask,
                                 const MetricSpec& spec, bool complement = false) {
    if (index.size() != mask.size()) throw ContractError("index and mask sizes differ");
    if (index.empty()) throw ContractError("empty index plane");
    const std::size_t n = index.size();

    switch (spec.kind) {
        case MetricKind::IoU: return iou_from(confusion(index, mask, spec.threshold, complement));
        case MetricKind::F1: return f1_from(confusion(index, mask, spec.threshold, complement));
        case MetricKind::AUC: {
            if (spec.auc_single_threshold) {
                const auto c = confusion(index, mask, spec.threshold, complement);
                if (c.tp + c.fn == 0 || c.fp + c.tn == 0) return {0.0, true};
                const double tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
                const double tnr = static_cast<double>(c.tn) / static_cast<double>(c.fp + c.tn);
                return {0.5 * (tpr + tnr), false};
            }
            bool degenerate = false;
            const double v = detail::auc_rank(index, mask, complement, degenerate);
            return {v, degenerate};
        }
        case MetricKind::CS: {
            double dot = 0.0, ii = 0.0, mm = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = detail::plane_value(index[i], complement);
                const double m = mask[i] ? 1.0 : 0.0;
                dot += x * m;
                ii += x * x;
                mm += m;
            }
            if (ii <= 0.0 || mm <= 0.0) return {0.0, true};
            return {dot / std::sqrt(ii * mm), false};
        }
        case MetricKind::PCC: {
            double sx = 0.0, sm = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                sx += detail::plane_value(index[i], complement);
                sm += mask[i] ? 1.0 : 0.0;
            }
            const double mx = sx / static_cast<double>(n);
            const double mm = sm / static_cast<double>(n);
            double sxy = 0.0, sxx = 0.0, syy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dx = detail::plane_value(index[i], complement) - mx;
                const double dy = (mask[i] ? 1.0 : 0.0) - mm;
                sxy += dx * dy;
                sxx += dx * dx;
                syy += dy * dy;
            }
            if (sxx <= 0.0 || syy <= 0.0) return {0.0, true};
            return {sxy / std::sqrt(sxx * syy), false};
        }
    }
    throw ContractError("unknown metric");
}

}  // namespace indexforge
