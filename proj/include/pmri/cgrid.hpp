#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "pmri/grid.hpp"

namespace pmri {

// CGRD container, all integers and scalars little-endian:
//
//   offset  size       field
//   0       4          magic "CGRD"
//   4       2          version (u16) = 1
//   6       2          ndims (u16)
//   8       8*ndims    dims (u64 each), slowest-varying first
//   ...     1          scalar width in bytes: 4 (float32) or 8 (float64)
//   ...     payload    interleaved (real, imag) pairs in row-major order

enum class Precision : std::uint8_t { Float32 = 4, Float64 = 8 };

/// An n-dimensional complex array as stored in a CGRD file.
struct CgridArray {
    std::vector<std::uint64_t> dims;
    std::vector<cplx> data;
    Precision precision = Precision::Float64;

    std::uint64_t element_count() const {
        return std::accumulate(dims.begin(), dims.end(), std::uint64_t{1}, std::multiplies<>());
    }
    friend bool operator==(const CgridArray&, const CgridArray&) = default;
};

inline constexpr std::array<char, 4> kCgridMagic{'C', 'G', 'R', 'D'};
inline constexpr std::uint16_t kCgridVersion = 1;

namespace detail {

template <class U>
void put_le(std::vector<unsigned char>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

template <class U>
U get_le(const unsigned char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
    return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_cgrid(const CgridArray& a) {
    if (a.dims.size() > 0xFFFF) throw ValidationError("cgrid: too many dimensions");
    if (a.element_count() != a.data.size())
        throw DimensionError("cgrid: data length " + std::to_string(a.data.size()) +
                             " does not match product of dims " + std::to_string(a.element_count()));
    if (a.precision != Precision::Float32 && a.precision != Precision::Float64)
        throw ValidationError("cgrid: unsupported precision");
    std::vector<unsigned char> out(kCgridMagic.begin(), kCgridMagic.end());
    detail::put_le<std::uint16_t>(out, kCgridVersion);
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(a.dims.size()));
    for (auto d : a.dims) detail::put_le<std::uint64_t>(out, d);
    out.push_back(static_cast<unsigned char>(a.precision));
    out.reserve(out.size() + a.data.size() * 2 * static_cast<std::size_t>(a.precision));
    for (const auto& v : a.data)
        for (double part : {v.real(), v.imag()}) {
            if (a.precision == Precision::Float64)
                detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(part));
            else
                detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(part)));
        }
    return out;
}

inline CgridArray decode_cgrid(const std::vector<unsigned char>& bytes, const std::string& origin = "<memory>") {
    auto fail = [&](const std::string& what) { throw IoError("cgrid " + origin + ": " + what); };
    if (bytes.size() < 9) fail("file too short for header");
    if (!std::equal(kCgridMagic.begin(), kCgridMagic.end(), bytes.begin())) fail("bad magic, expected CGRD");
    const auto version = detail::get_le<std::uint16_t>(bytes.data() + 4);
    if (version != kCgridVersion) fail("unsupported version " + std::to_string(version));
    const auto ndims = detail::get_le<std::uint16_t>(bytes.data() + 6);
    std::size_t pos = 8;
    if (bytes.size() < pos + 8 * std::size_t{ndims} + 1) fail("truncated dimension table");
    CgridArray a;
    for (std::size_t i = 0; i < ndims; ++i, pos += 8) a.dims.push_back(detail::get_le<std::uint64_t>(bytes.data() + pos));
    const auto flag = bytes[pos++];
    if (flag != 4 && flag != 8) fail("unknown scalar width " + std::to_string(flag));
    a.precision = static_cast<Precision>(flag);
    const std::uint64_t count = a.element_count();
    if (bytes.size() - pos != count * 2 * flag)
        fail("payload is " + std::to_string(bytes.size() - pos) + " bytes, expected " + std::to_string(count * 2 * flag));
    a.data.resize(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        double parts[2];
        for (double& part : parts) {
            if (flag == 8) {
                part = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes.data() + pos));
            } else {
                part = static_cast<double>(std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes.data() + pos)));
            }
            pos += flag;
        }
        a.data[k] = {parts[0], parts[1]};
    }
    return a;
}

inline void write_cgrid(const std::filesystem::path& path, const CgridArray& a) {
    const auto bytes = encode_cgrid(a);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing " + path.string());
}

inline CgridArray read_cgrid(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_cgrid(bytes, path.string());
}

// Conversions between library types and arrays.

inline CgridArray to_array(const ComplexGrid& g, Precision p = Precision::Float64) {
    return {{g.height(), g.width()}, g.storage(), p};
}

inline CgridArray to_array(const MultiChannelGrid& g, Precision p = Precision::Float64) {
    return {{g.channels(), g.height(), g.width()}, g.storage(), p};
}

/// Masks are stored as 1 + 0i (kept) and 0 (not kept).
inline CgridArray to_array(const SamplingMask& m) {
    CgridArray a{{m.height(), m.width()}, std::vector<cplx>(m.size()), Precision::Float32};
    for (std::size_t k = 0; k < m.size(); ++k) a.data[k] = m.kept(k) ? 1.0 : 0.0;
    return a;
}

/// Stacks equally shaped arrays along a new leading dimension.
inline CgridArray stack(const std::vector<CgridArray>& items) {
    if (items.empty()) throw DimensionError("cgrid: cannot stack zero arrays");
    CgridArray out{{items.size()}, {}, items.front().precision};
    out.dims.insert(out.dims.end(), items.front().dims.begin(), items.front().dims.end());
    for (const auto& a : items) {
        if (a.dims != items.front().dims) throw DimensionError("cgrid: stacked arrays differ in shape");
        out.data.insert(out.data.end(), a.data.begin(), a.data.end());
    }
    return out;
}

/// Leading-dimension count of a stack; a lower-rank array counts as one item.
inline std::size_t item_count(const CgridArray& a, std::size_t item_rank) {
    if (a.dims.size() == item_rank) return 1;
    if (a.dims.size() == item_rank + 1) return static_cast<std::size_t>(a.dims.front());
    throw DimensionError("cgrid: expected rank " + std::to_string(item_rank) + " or " + std::to_string(item_rank + 1) +
                         ", got " + std::to_string(a.dims.size()));
}

inline MultiChannelGrid multichannel_item(const CgridArray& a, std::size_t index) {
    const std::size_t n = item_count(a, 3);
    if (index >= n) throw DimensionError("cgrid: item index out of range");
    const auto& d = a.dims;
    const std::size_t off = d.size() - 3;
    MultiChannelGrid g(d[off], d[off + 1], d[off + 2]);
    const std::size_t len = g.size();
    std::copy(a.data.begin() + static_cast<std::ptrdiff_t>(index * len),
              a.data.begin() + static_cast<std::ptrdiff_t>((index + 1) * len), g.data().begin());
    return g;
}

inline ComplexGrid grid_item(const CgridArray& a, std::size_t index) {
    const std::size_t n = item_count(a, 2);
    if (index >= n) throw DimensionError("cgrid: item index out of range");
    const auto& d = a.dims;
    const std::size_t off = d.size() - 2;
    const std::size_t len = d[off] * d[off + 1];
    return ComplexGrid(d[off], d[off + 1],
                       std::vector<cplx>(a.data.begin() + static_cast<std::ptrdiff_t>(index * len),
                                         a.data.begin() + static_cast<std::ptrdiff_t>((index + 1) * len)));
}

inline SamplingMask mask_item(const CgridArray& a, std::size_t index) {
    const ComplexGrid g = grid_item(a, index);
    std::vector<bool> kept(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) kept[k] = g.data()[k] != cplx{0.0, 0.0};
    return SamplingMask(g.height(), g.width(), std::move(kept));
}

}  // namespace pmri
