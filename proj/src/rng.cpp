#include "sparsecb/rng.hpp"

namespace sparsecb {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t hash_words(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t w : words) h = mix64(h ^ mix64(w));
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(hash_words({seed, stream_id})) {}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t k = counter_++;
  return mix64(key_ + k * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t RngStream::uniform_index(std::size_t n) {
  auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return i < n ? i : n - 1;
}

RngStream RngStream::split(std::uint64_t child_id) const {
  return RngStream(seed_, hash_words({stream_id_, child_id}));
}

}  // namespace sparsecb
