#pragma once

/**
 * Minimal NPY (format 1.0) reader/writer for little-endian float32 arrays
 * in C order. Output is byte-identical to numpy.save for the same array.
 */

#include <bit>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "indexforge/error.hpp"

namespace indexforge {

static_assert(std::endian::native == std::endian::little, "NPY IO assumes a little-endian host");

struct NpyArray {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    std::size_t element_count() const noexcept {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
};

inline constexpr char kNpyMagic[] = "\x93NUMPY";

inline std::string npy_header(std::span<const std::size_t> shape) {
    std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) dict += ", ";
        dict += std::to_string(shape[i]);
    }
    if (shape.size() == 1) dict += ',';
    dict += "), }";
    // magic(6) + version(2) + length(2) + dict + padding + '\n' is a multiple of 64.
    const std::size_t unpadded = 10 + dict.size() + 1;
    dict.append((64 - unpadded % 64) % 64, ' ');
    dict += '\n';

    std::string out(kNpyMagic, 6);
    out += '\x01';
    out += '\x00';
    const auto len = static_cast<std::uint16_t>(dict.size());
    out += static_cast<char>(len & 0xff);
    out += static_cast<char>(len >> 8);
    out += dict;
    return out;
}

inline void save_npy(const std::filesystem::path& path, std::span<const std::size_t> shape,
                     std::span<const float> data) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    if (n != data.size()) throw ContractError("save_npy: shape does not match data size");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    const std::string header = npy_header(shape);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    if (!out) throw DataError("failed writing " + path.string());
}

namespace detail {

inline std::string dict_value(const std::string& dict, const std::string& key, const std::string& file) {
    const auto k = dict.find("'" + key + "'");
    if (k == std::string::npos) throw DataError(file + ": NPY header lacks '" + key + "'");
    auto v = dict.find(':', k);
    if (v == std::string::npos) throw DataError(file + ": malformed NPY header");
    ++v;
    while (v < dict.size() && dict[v] == ' ') ++v;
    std::size_t end = v;
    if (v < dict.size() && dict[v] == '(') {
        end = dict.find(')', v);
        if (end == std::string::npos) throw DataError(file + ": malformed NPY shape");
        return dict.substr(v, end - v + 1);
    }
    if (v < dict.size() && dict[v] == '\'') {
        end = dict.find('\'', v + 1);
        if (end == std::string::npos) throw DataError(file + ": malformed NPY header");
        return dict.substr(v + 1, end - v - 1);
    }
    while (end < dict.size() && dict[end] != ',' && dict[end] != '}') ++end;
    return dict.substr(v, end - v);
}

}  // namespace detail

inline NpyArray load_npy(const std::filesystem::path& path) {
    const std::string name = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + name);
    char preamble[8];
    if (!in.read(preamble, 8) || std::memcmp(preamble, kNpyMagic, 6) != 0)
        throw DataError(name + ": not an NPY file (bad magic)");
    const auto major = static_cast<unsigned char>(preamble[6]);
    std::size_t header_len = 0;
    if (major == 1) {
        unsigned char b[2];
        if (!in.read(reinterpret_cast<char*>(b), 2)) throw DataError(name + ": truncated NPY header");
        header_len = b[0] | (std::size_t{b[1]} << 8);
    } else if (major == 2 || major == 3) {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError(name + ": truncated NPY header");
        header_len = b[0] | (std::size_t{b[1]} << 8) | (std::size_t{b[2]} << 16) | (std::size_t{b[3]} << 24);
    } else {
        throw DataError(name + ": unsupported NPY version " + std::to_string(major));
    }
    std::string dict(header_len, '\0');
    if (!in.read(dict.data(), static_cast<std::streamsize>(header_len))) throw DataError(name + ": truncated NPY header");

    const std::string descr = detail::dict_value(dict, "descr", name);
    if (descr != "<f4" && descr != "=f4") throw DataError(name + ": expected f4 data, found '" + descr + "'");
    const std::string order = detail::dict_value(dict, "fortran_order", name);
    if (order.find("False") == std::string::npos) throw DataError(name + ": Fortran-order arrays are not supported");

    NpyArray arr;
    const std::string shape = detail::dict_value(dict, "shape", name);
    std::size_t i = 1;
    while (i < shape.size()) {
        while (i < shape.size() && (shape[i] == ' ' || shape[i] == ',')) ++i;
        if (i >= shape.size() || shape[i] == ')') break;
        std::size_t j = i;
        while (j < shape.size() && std::isdigit(static_cast<unsigned char>(shape[j]))) ++j;
        if (j == i) throw DataError(name + ": malformed NPY shape " + shape);
        arr.shape.push_back(std::stoull(shape.substr(i, j - i)));
        i = j;
    }

    const std::size_t n = arr.element_count();
    arr.data.resize(n);
    if (!in.read(reinterpret_cast<char*>(arr.data.data()), static_cast<std::streamsize>(n * sizeof(float))))
        throw DataError(name + ": truncated NPY data");
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(name + ": trailing bytes after NPY data");
    return arr;
}

}  // namespace indexforge
