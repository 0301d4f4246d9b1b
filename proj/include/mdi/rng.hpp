#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mdi {

// Counter-based deterministic generator. A stream is identified by a key
// derived from (seed, name); each draw hashes (key, counter++), so streams
// never share state and can be split by name without coordination.
class RngStream {
  public:
    RngStream() = default;
    RngStream(std::uint64_t seed, std::string_view name);

    // Child stream with an independent key; does not advance this stream.
    RngStream split(std::string_view child) const;

    std::uint64_t next_u64();
    // Uniform in [0, 1), 53-bit resolution.
    double next_double();
    // Unbiased integer in [0, n); n must be > 0.
    std::uint64_t next_below(std::uint64_t n);
    // Box-Muller; consumes exactly two uniforms per draw.
    double next_normal(double mu, double sigma);

    template <class T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

  private:
    std::uint64_t key_ = 0x9E3779B97F4A7C15ull;
    std::uint64_t counter_ = 0;
};

// FNV-1a over bytes; also used for run-manifest content digests.
std::uint64_t fnv1a64(std::string_view bytes);

} // namespace mdi
