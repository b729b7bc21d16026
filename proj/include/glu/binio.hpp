#pragma once
// Raw little-endian array files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "glu/errors.hpp"

namespace glu::binio {

template <class T>
T byteswap_value(T v) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
}

template <class T>
void write_le(const std::filesystem::path& path, std::span<const T> data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    if constexpr (std::endian::native == std::endian::little) {
        f.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size_bytes()));
    } else {
        for (T v : data) {
            T s = byteswap_value(v);
            f.write(reinterpret_cast<const char*>(&s), sizeof(T));
        }
    }
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

template <class T>
std::vector<T> read_le(const std::filesystem::path& path, std::size_t count) {
    if (!std::filesystem::exists(path)) throw NotFoundError("not found: " + path.string());
    const auto bytes = std::filesystem::file_size(path);
    if (bytes != count * sizeof(T))
        throw FormatError(path.string() + ": expected " + std::to_string(count * sizeof(T)) + " bytes, found " +
                          std::to_string(bytes));
    std::vector<T> out(count);
    std::ifstream f(path, std::ios::binary);
    f.read(reinterpret_cast<char*>(out.data()), std::streamsize(count * sizeof(T)));
    if (!f) throw FormatError("short read: " + path.string());
    if constexpr (std::endian::native != std::endian::little)
        for (T& v : out) v = byteswap_value(v);
    return out;
}

}  // namespace glu::binio
