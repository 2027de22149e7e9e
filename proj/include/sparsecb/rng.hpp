#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>

namespace sparsecb {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_words(std::initializer_list<std::uint64_t> words);

// Counter-based random stream keyed by (seed, stream_id).
//
// Draw k of a stream is mix64(key + k * golden), so a stream is fully
// determined by its key and the number of draws consumed so far. Streams are
// split by hashing a child id into the stream id; children never share draws
// with their parent.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t draws() const { return counter_; }

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of resolution. One draw.
  double uniform();

  // floor(uniform() * n), clamped to n - 1. One draw.
  std::size_t uniform_index(std::size_t n);

  RngStream split(std::uint64_t child_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Child ids used by the algorithms. Every run receives one master stream and
// derives these; the ids are part of the reproducibility contract.
namespace streams {
inline constexpr std::uint64_t kInstance = 0x10;
inline constexpr std::uint64_t kPhase1Env = 0x21;
inline constexpr std::uint64_t kPhase1Actions = 0x22;
inline constexpr std::uint64_t kPhase1Policies = 0x23;
inline constexpr std::uint64_t kPhase2Env = 0x31;
inline constexpr std::uint64_t kPhase2Mix = 0x32;
inline constexpr std::uint64_t kExoEnv = 0x41;
inline constexpr std::uint64_t kExoActions = 0x42;
inline constexpr std::uint64_t kEtcEnv = 0x61;
inline constexpr std::uint64_t kEtcActions = 0x62;
}  // namespace streams

}  // namespace sparsecb
