// include/xmodal/common.hpp
#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

namespace xmodal {

// Error taxonomy. Everything user-facing derives from std::runtime_error so
// the CLI can report any failure uniformly.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Reduction { sum, mean };

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent deterministic seed per (master, stream) pair. Used so that e.g.
// dataset generation, splitting and each training epoch draw from unrelated
// streams of one user-visible seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 1));
}

// 17 significant digits: round-trips any finite double bit-exactly through
// text. Used by the checkpoint and matrix file writers.
inline std::string format_double_17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace xmodal
