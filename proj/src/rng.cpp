#include "voltgrid/rng.hpp"

namespace voltgrid {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index) {
  std::uint64_t x = splitmix64(master);
  x = splitmix64(x ^ (0x517cc1b727220a95ULL + static_cast<std::uint64_t>(stream)));
  x = splitmix64(x ^ index);
  return x;
}

std::mt19937_64 make_rng(std::uint64_t master, Stream stream, std::uint64_t index) {
  return std::mt19937_64(derive_seed(master, stream, index));
}

}  // namespace voltgrid
