#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace clove {

uint64_t splitmix64(uint64_t x);

/// Derives an independent substream seed from a base seed and a tag path.
/// Every random draw site in the library gets its own (purpose, round,
/// client, ...) path, so skipping a consumer never shifts another stream.
uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> path);

class RngStream {
public:
    explicit RngStream(uint64_t seed) : gen_(splitmix64(seed)) {}
    RngStream(uint64_t seed, std::initializer_list<uint64_t> path)
        : gen_(derive_seed(seed, path)) {}

    double normal() { return normal_(gen_); }
    double uniform() { return uniform_(gen_); }

    /// Uniform integer in {0, ..., n-1}.
    std::size_t uniform_index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
    }

    std::mt19937_64& gen() { return gen_; }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Stream purpose tags. Stable values: changing them changes every replay.
namespace stream {
inline constexpr uint64_t kOptima = 1;
inline constexpr uint64_t kData = 2;
inline constexpr uint64_t kTestData = 3;
inline constexpr uint64_t kInit = 4;
inline constexpr uint64_t kParticipation = 5;
inline constexpr uint64_t kCluster = 6;
inline constexpr uint64_t kLocalShuffle = 7;
inline constexpr uint64_t kFirstRandom = 8;
inline constexpr uint64_t kKFedLocal = 9;
inline constexpr uint64_t kKFedServer = 10;
inline constexpr uint64_t kLocalOnlyInit = 11;
inline constexpr uint64_t kSkew = 12;
}  // namespace stream

}  // namespace clove
