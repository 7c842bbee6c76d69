#pragma once

// Internal little-endian binary I/O helpers shared by the RADR raster and
// ACNW weight formats. Byte-explicit so files are identical on any host.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>

#include "radar/errors.hpp"

namespace radar::binio {

inline void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& buf, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(buf, bits);
}
inline void put_f32(std::string& buf, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

// Reader over an in-memory buffer; throws FormatError on truncation so a
// short file never yields partial data.
struct Cursor {
    const unsigned char* p;
    size_t left;
    const char* format_name;  // e.g. "RADR" — used in error messages

    void need(size_t n, const char* what) {
        if (left < n)
            throw FormatError(std::string("truncated ") + format_name + " file reading " + what);
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
        p += 4;
        left -= 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        p += 8;
        left -= 8;
        return v;
    }
    double f64(const char* what) {
        uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    float f32(const char* what) {
        uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

inline std::string read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    std::fseek(f, 0, SEEK_END);
    long n = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::string buf(static_cast<size_t>(n), '\0');
    size_t got = n ? std::fread(buf.data(), 1, static_cast<size_t>(n), f) : 0;
    std::fclose(f);
    if (got != static_cast<size_t>(n)) throw IoError("short read on " + path);
    return buf;
}

inline void write_file(const std::string& path, const std::string& buf) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot create " + path);
    size_t put = std::fwrite(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    if (put != buf.size()) throw IoError("short write on " + path);
}

}  // namespace radar::binio
