#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace spdescore {

/// SplitMix64 output function. Used as a counter-based stream deriver:
/// the k-th stream of a root seed is the k-th output of the SplitMix64
/// sequence started at that root.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// FNV-1a over a byte range; used for basis and config fingerprints.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xCBF29CE484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

/// Seed of logical stream `stream` under `root`. Streams are assigned to work
/// items by item index (sample id, check id, ...), never by thread id, so
/// results do not depend on the worker count.
inline std::uint64_t stream_seed(std::uint64_t root, std::uint64_t stream) {
    return splitmix64(root + stream * 0x9E3779B97F4A7C15ull);
}

inline std::mt19937_64 make_stream(std::uint64_t root, std::uint64_t stream) {
    return std::mt19937_64(stream_seed(root, stream));
}

/// Independent sub-root for a named purpose (one per subcommand / check id).
inline std::uint64_t derive_root(std::uint64_t root, std::string_view tag) {
    return splitmix64(root ^ fnv1a(tag));
}

/// n i.i.d. standard normals from `gen`.
inline Eigen::VectorXd normal_vector(std::mt19937_64& gen, Eigen::Index n) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(gen);
    return v;
}

}  // namespace spdescore
