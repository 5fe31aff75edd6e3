#pragma once

#include <cstdint>
#include <random>

namespace hemsim {

// splitmix64, used to derive independent deterministic substreams from one
// scenario seed without correlation between consecutive seeds.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

inline std::mt19937_64 make_rng(uint64_t seed, uint64_t stream = 0) {
    return std::mt19937_64(mix_seed(seed, stream));
}

// Stream ids for the independent random processes of a run.
namespace stream {
constexpr uint64_t kActivities = 0x01;
constexpr uint64_t kEvUsage = 0x02;
constexpr uint64_t kHouseArea = 0x03;
constexpr uint64_t kGaBase = 0x100;
}  // namespace stream

}  // namespace hemsim
