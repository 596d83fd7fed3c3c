#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "mpag/errors.hpp"

namespace mpag {

// Little-endian binary primitives shared by the index and checkpoint formats.

inline void write_u32(std::ostream& os, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

inline void write_f64(std::ostream& os, double d) { write_u64(os, std::bit_cast<std::uint64_t>(d)); }

inline void write_str(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& is) {
    char buf[4];
    is.read(buf, 4);
    if (is.gcount() != 4) throw IoError("truncated file: expected 4 bytes");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

inline std::uint64_t read_u64(std::istream& is) {
    char buf[8];
    is.read(buf, 8);
    if (is.gcount() != 8) throw IoError("truncated file: expected 8 bytes");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

inline std::string read_str(std::istream& is, std::uint64_t max_len = (1ull << 32)) {
    std::uint64_t n = read_u64(is);
    if (n > max_len) throw IoError("corrupt file: unreasonable string length");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::uint64_t>(is.gcount()) != n)
        throw IoError("truncated file: expected " + std::to_string(n) + " string bytes");
    return s;
}

} // namespace mpag
