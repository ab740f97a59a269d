#pragma once

/**
 * Raster data model and the on-disk dataset layout.
 *
 * A dataset directory holds manifest.json
 *
 *     {"n_channels": 3,
 *      "samples": [{"image": "images/0000.npy", "mask": "masks/0000.npy", "split": "train"}, ...]}
 *
 * with paths relative to the manifest. Images are C x H x W float32 NPY
 * files, masks are H x W float32 NPY files holding only 0 and 1.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "indexforge/error.hpp"
#include "indexforge/npy.hpp"
#include "indexforge/parallel.hpp"

namespace indexforge {

enum class Split : std::uint8_t { Train, Val, Test };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw DataError("unknown split tag '" + s + "'");
}

/// Channels-first float32 raster.
struct Image {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;

    Image() = default;
    Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
        : channels(c), height(h), width(w), values(c * h * w, fill) {}

    std::size_t pixels() const noexcept { return height * width; }

    std::span<const float> channel(std::size_t k) const { return {values.data() + k * pixels(), pixels()}; }
    std::span<float> channel(std::size_t k) { return {values.data() + k * pixels(), pixels()}; }

    friend bool operator==(const Image&, const Image&) = default;
};

struct ImageSample {
    Image image;
    std::vector<std::uint8_t> mask;  // H x W, values in {0, 1}
    Split split = Split::Train;

    std::size_t pixels() const noexcept { return image.pixels(); }
};

struct Dataset {
    std::size_t n_channels = 0;
    std::vector<ImageSample> samples;

    std::size_t count(Split s) const noexcept {
        std::size_t n = 0;
        for (const auto& x : samples) n += x.split == s;
        return n;
    }

    /// Copies of the samples tagged s, in manifest order.
    std::vector<ImageSample> subset(Split s) const {
        std::vector<ImageSample> out;
        for (const auto& x : samples)
            if (x.split == s) out.push_back(x);
        return out;
    }

    /// Throws DataError naming the first sample that breaks an invariant.
    void validate() const {
        if (n_channels == 0) throw DataError("dataset has zero channels");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i];
            const std::string where = "sample " + std::to_string(i);
            if (s.image.channels != n_channels)
                throw DataError(where + ": image has " + std::to_string(s.image.channels) + " channels, expected " +
                                std::to_string(n_channels));
            if (s.image.pixels() == 0) throw DataError(where + ": empty image");
            if (s.image.values.size() != s.image.channels * s.image.pixels())
                throw DataError(where + ": image buffer does not match its shape");
            if (s.mask.size() != s.image.pixels()) throw DataError(where + ": mask shape differs from image");
            for (auto m : s.mask)
                if (m > 1) throw DataError("mask not binary at " + where);
        }
    }
};

namespace detail {

inline ImageSample load_sample(const std::filesystem::path& root, const nlohmann::json& entry, std::size_t index,
                               std::size_t n_channels) {
    const std::string where = "sample " + std::to_string(index);
    if (!entry.is_object()) throw DataError(where + ": manifest entry is not an object");
    for (const char* key : {"image", "mask", "split"})
        if (!entry.contains(key) || !entry[key].is_string())
            throw DataError(where + ": manifest entry lacks string field '" + key + "'");
    for (auto it = entry.begin(); it != entry.end(); ++it)
        if (it.key() != "image" && it.key() != "mask" && it.key() != "split")
            throw DataError(where + ": unknown manifest field '" + it.key() + "'");

    ImageSample s;
    try {
        s.split = parse_split(entry["split"].get<std::string>());
    } catch (const DataError& e) {
        throw DataError(where + ": " + e.what());
    }

    NpyArray img;
    NpyArray mask;
    try {
        img = load_npy(root / entry["image"].get<std::string>());
        mask = load_npy(root / entry["mask"].get<std::string>());
    } catch (const DataError& e) {
        throw DataError(where + ": " + e.what());
    }
    if (img.shape.size() != 3) throw DataError(where + ": image must be 3-D (C, H, W)");
    if (img.shape[0] != n_channels)
        throw DataError(where + ": image has " + std::to_string(img.shape[0]) + " channels, expected " +
                        std::to_string(n_channels));
    if (mask.shape.size() != 2 || mask.shape[0] != img.shape[1] || mask.shape[1] != img.shape[2])
        throw DataError(where + ": mask shape differs from image");
    s.image.channels = img.shape[0];
    s.image.height = img.shape[1];
    s.image.width = img.shape[2];
    s.image.values = std::move(img.data);
    s.mask.resize(mask.data.size());
    for (std::size_t p = 0; p < mask.data.size(); ++p) {
        const float v = mask.data[p];
        if (v != 0.0f && v != 1.0f) throw DataError("mask not binary at " + where);
        s.mask[p] = v == 1.0f ? 1 : 0;
    }
    return s;
}

}  // namespace detail

/// Loads and validates a dataset manifest. Samples are read concurrently.
inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest " + manifest_path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("n_channels") || !doc["n_channels"].is_number_unsigned() ||
        !doc.contains("samples") || !doc["samples"].is_array())
        throw DataError("manifest needs an unsigned 'n_channels' and a 'samples' array");

    Dataset ds;
    ds.n_channels = doc["n_channels"].get<std::size_t>();
    const auto& entries = doc["samples"];
    ds.samples.resize(entries.size());
    const auto root = manifest_path.parent_path();
    parallel_for(entries.size(), [&](std::size_t i) {
        ds.samples[i] = detail::load_sample(root, entries[i], i, ds.n_channels);
    });
    ds.validate();
    return ds;
}

/// Writes manifest.json plus images/NNNN.npy and masks/NNNN.npy under dir.
inline std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "masks");
    nlohmann::json manifest;
    manifest["n_channels"] = ds.n_channels;
    manifest["samples"] = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        std::ostringstream stem;
        stem << std::setw(4) << std::setfill('0') << i;
        const std::string image_rel = "images/" + stem.str() + ".npy";
        const std::string mask_rel = "masks/" + stem.str() + ".npy";
        manifest["samples"].push_back({{"image", image_rel}, {"mask", mask_rel}, {"split", to_string(ds.samples[i].split)}});
    }
    parallel_for(ds.samples.size(), [&](std::size_t i) {
        const auto& s = ds.samples[i];
        std::ostringstream stem;
        stem << std::setw(4) << std::setfill('0') << i;
        const std::size_t ishape[3] = {s.image.channels, s.image.height, s.image.width};
        save_npy(dir / "images" / (stem.str() + ".npy"), ishape, s.image.values);
        std::vector<float> m(s.mask.begin(), s.mask.end());
        const std::size_t mshape[2] = {s.image.height, s.image.width};
        save_npy(dir / "masks" / (stem.str() + ".npy"), mshape, m);
    });
    const auto path = dir / "manifest.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << manifest.dump(2) << '\n';
    return path;
}

}  // namespace indexforge
