#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace ecol {

inline constexpr uint64_t kFnvOffset = 1469598103934665603ULL;

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t state = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        state ^= p[i];
        state *= 1099511628211ULL;
    }
    return state;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t state = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), state);
}

// Guards against string literals silently binding to (const void*, size_t).
inline uint64_t fnv1a64(const char* s, uint64_t state = kFnvOffset) {
    return fnv1a64(s, std::char_traits<char>::length(s), state);
}

std::string hash_hex(uint64_t h);

} // namespace ecol
