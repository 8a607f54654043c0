#ifndef FPEDIT_HASH_HPP
#define FPEDIT_HASH_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace fpedit {

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path);

std::string hex64(std::uint64_t v);

} // namespace fpedit

#endif
