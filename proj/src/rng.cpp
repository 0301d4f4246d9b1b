#include "mdi/rng.hpp"

#include <cmath>

namespace mdi {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

RngStream::RngStream(std::uint64_t seed, std::string_view name) {
    key_ = mix64(mix64(seed + kGolden) ^ fnv1a64(name));
}

RngStream RngStream::split(std::string_view child) const {
    RngStream s;
    s.key_ = mix64(key_ ^ fnv1a64(child) ^ kGolden);
    return s;
}

std::uint64_t RngStream::next_u64() {
    return mix64(key_ + (counter_++) * kGolden);
}

double RngStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
    // Rejection sampling over the top multiple of n.
    std::uint64_t limit = n * ((~0ull) / n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double RngStream::next_normal(double mu, double sigma) {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    return mu + sigma * r * std::cos(2.0 * M_PI * u2);
}

} // namespace mdi
