#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dbot::util {

// 64-bit FNV-1a. Stable across platforms and runs; used for prompt
// fingerprints, config hashes, and run ids.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t hash = seed;
    for (unsigned char byte : data) {
        hash ^= static_cast<std::uint64_t>(byte);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

inline std::string digest_hex(std::string_view data) {
    return to_hex(fnv1a64(data));
}

} // namespace dbot::util
