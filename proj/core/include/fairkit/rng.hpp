#pragma once

#include <cstdint>
#include <random>

namespace fairkit {

// Every consumer of randomness gets its own stream derived from (seed, tag).
// Keeping streams separate is what makes the beta=0 adversarial trainer
// bit-identical to the plain classifier trainer: adversary init/updates must
// not advance the RNG the predictor consumes.
namespace stream {
inline constexpr std::uint64_t kDataShuffle = 0x01;
inline constexpr std::uint64_t kPredictorInit = 0x02;
inline constexpr std::uint64_t kAdversaryInit = 0x03;
inline constexpr std::uint64_t kNoise = 0x04;
inline constexpr std::uint64_t kProbe = 0x05;
inline constexpr std::uint64_t kBootstrap = 0x06;
inline constexpr std::uint64_t kPartition = 0x07;
inline constexpr std::uint64_t kSynthData = 0x08;
inline constexpr std::uint64_t kGeneratorDecoder = 0x09;
inline constexpr std::uint64_t kGeneratorSample = 0x0a;
inline constexpr std::uint64_t kThresholdMix = 0x0b;
inline constexpr std::uint64_t kAdversaryPretrain = 0x0c;
inline constexpr std::uint64_t kAugment = 0x0d;
}  // namespace stream

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(splitmix64(seed) ^ splitmix64(tag));
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t tag) {
    return std::mt19937_64(derive_seed(seed, tag));
}

}  // namespace fairkit
