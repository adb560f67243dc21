#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dsnet/error.hpp"

namespace dsnet {

// Minimal binary PGM (P5) reader/writer. 8-bit for maxval < 256, otherwise
// 16-bit big-endian per the PNM convention.
struct PgmImage {
    int width = 0;
    int height = 0;
    int maxval = 255;
    std::vector<std::uint16_t> pixels;  // row-major
};

namespace detail {

inline int pgm_next_int(std::istream& in, const std::string& path) {
    // skip whitespace and '#' comments
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) throw FormatError(path + ": malformed PGM header");
    long v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        if (v > 1 << 30) throw FormatError(path + ": PGM header value out of range");
        c = in.get();
    }
    return static_cast<int>(v);
}

}  // namespace detail

inline PgmImage read_pgm(const std::filesystem::path& path) {
    const std::string name = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(name + ": cannot open");
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    if (m0 != 'P' || m1 != '5')
        throw FormatError(name + ": not a binary grayscale PGM (expected P5 magic)");
    PgmImage img;
    img.width = detail::pgm_next_int(in, name);
    img.height = detail::pgm_next_int(in, name);
    img.maxval = detail::pgm_next_int(in, name);
    if (img.width < 1 || img.height < 1 || img.maxval < 1 || img.maxval > 65535)
        throw FormatError(name + ": bad PGM dimensions/maxval");
    // header ends with exactly one whitespace byte (already consumed by the
    // integer scanner's terminating character)
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    img.pixels.resize(n);
    if (img.maxval < 256) {
        std::vector<std::uint8_t> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw FormatError(name + ": truncated PGM payload");
        for (std::size_t i = 0; i < n; ++i) img.pixels[i] = raw[i];
    } else {
        std::vector<std::uint8_t> raw(2 * n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(2 * n));
        if (static_cast<std::size_t>(in.gcount()) != 2 * n)
            throw FormatError(name + ": truncated PGM payload");
        for (std::size_t i = 0; i < n; ++i)
            img.pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
    return img;
}

inline void write_pgm8(const std::filesystem::path& path, int width, int height,
                       const std::vector<std::uint8_t>& pixels) {
    if (static_cast<std::size_t>(width) * height != pixels.size())
        throw DimensionError(path.string() + ": pixel count does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace dsnet
