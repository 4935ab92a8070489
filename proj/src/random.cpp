#include "iabsim/random.hpp"

#include <vector>

namespace iabsim {

namespace {

// FNV-1a; std::hash is not stable across implementations.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::mt19937_64 make_substream(std::uint64_t seed, std::string_view name,
                               std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  auto push64 = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push64(seed);
  push64(fnv1a(name));
  for (auto k : keys) push64(k);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace iabsim
