#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "indexforge/dataset.hpp"
#include "indexforge/error.hpp"
#include "indexforge/evaluate.hpp"
#include "indexforge/expr.hpp"
#include "indexforge/parallel.hpp"

namespace indexforge {

/// C: append one index. CM: append several. R: replace one channel.
/// RM: replace several channels.
enum class UpdateMode : std::uint8_t { C, CM, R, RM };

inline std::string to_string(UpdateMode m) {
    switch (m) {
        case UpdateMode::C: return "C";
        case UpdateMode::CM: return "CM";
        case UpdateMode::R: return "R";
        case UpdateMode::RM: return "RM";
    }
    return "?";
}

inline UpdateMode parse_update_mode(const std::string& s) {
    if (s == "C") return UpdateMode::C;
    if (s == "CM") return UpdateMode::CM;
    if (s == "R") return UpdateMode::R;
    if (s == "RM") return UpdateMode::RM;
    throw ContractError("unknown update mode '" + s + "' (expected C, CM, R or RM)");
}

/// Channel replaced by each expression under R/RM: the lowest channel the
/// expression uses that no earlier expression has taken.
inline std::vector<std::uint32_t> replacement_targets(std::span<const ExprTree> expressions) {
    std::vector<std::uint32_t> targets;
    std::set<std::uint32_t> taken;
    for (std::size_t i = 0; i < expressions.size(); ++i) {
        bool found = false;
        for (auto ch : expressions[i].channels())
            if (!taken.count(ch)) {
                targets.push_back(ch);
                taken.insert(ch);
                found = true;
                break;
            }
        if (!found)
            throw ContractError("expression " + std::to_string(i) + " (" + render(expressions[i]) +
                                ") has no channel left to replace");
    }
    return targets;
}

/// New dataset with the evaluated indices appended (C, CM) or substituted
/// (R, RM). Masks and splits are carried over unchanged.
inline Dataset update_dataset(const Dataset& dataset, std::span<const ExprTree> expressions, UpdateMode mode,
                              const NormalizeConfig& norm = {}) {
    const bool single = mode == UpdateMode::C || mode == UpdateMode::R;
    if (single && expressions.size() != 1)
        throw ContractError("mode " + to_string(mode) + " takes exactly one expression, got " +
                            std::to_string(expressions.size()));
    if (!single && expressions.size() < 2)
        throw ContractError("mode " + to_string(mode) + " takes at least two expressions, got " +
                            std::to_string(expressions.size()));
    std::vector<CompiledExpr> compiled;
    for (const auto& e : expressions) {
        compiled.emplace_back(e);
        if (compiled.back().channel_span() > dataset.n_channels)
            throw EvaluationError("expression " + render(e) + " uses channel c" +
                                  std::to_string(compiled.back().channel_span() - 1) + " but the dataset has " +
                                  std::to_string(dataset.n_channels) + " channels");
    }
    const bool replace = mode == UpdateMode::R || mode == UpdateMode::RM;
    const auto targets = replace ? replacement_targets(expressions) : std::vector<std::uint32_t>{};

    Dataset out;
    out.n_channels = replace ? dataset.n_channels : dataset.n_channels + expressions.size();
    out.samples.resize(dataset.samples.size());
    parallel_for(dataset.samples.size(), [&](std::size_t i) {
        const auto& src = dataset.samples[i];
        std::vector<std::vector<float>> planes;
        for (std::size_t k = 0; k < compiled.size(); ++k) {
            try {
                planes.push_back(evaluate_index(compiled[k], src.image, norm).values);
            } catch (const DegenerateIndex& e) {
                throw DataError("sample " + std::to_string(i) + ": expression " + render(expressions[k]) +
                                " is degenerate: " + e.what());
            }
        }
        ImageSample s;
        s.mask = src.mask;
        s.split = src.split;
        s.image = Image(out.n_channels, src.image.height, src.image.width);
        const std::size_t px = src.image.pixels();
        std::copy(src.image.values.begin(), src.image.values.end(), s.image.values.begin());
        if (replace) {
            for (std::size_t k = 0; k < targets.size(); ++k)
                std::copy(planes[k].begin(), planes[k].end(), s.image.values.begin() + targets[k] * px);
        } else {
            for (std::size_t k = 0; k < planes.size(); ++k)
                std::copy(planes[k].begin(), planes[k].end(),
                          s.image.values.begin() + (dataset.n_channels + k) * px);
        }
        out.samples[i] = std::move(s);
    });
    return out;
}

}  // namespace indexforge
