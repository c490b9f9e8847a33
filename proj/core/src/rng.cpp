#include "outskirt/rng.hpp"

namespace outskirt {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) noexcept {
    std::uint64_t state = master ^ fnv1a(stream);
    splitmix64(state);
    return splitmix64(state);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
    std::uint64_t state = parent + 0x632be59bd9b4e019ULL * (index + 1);
    splitmix64(state);
    return splitmix64(state);
}

}  // namespace outskirt
