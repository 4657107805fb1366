#pragma once

#include <cstdint>
#include <random>

namespace voltgrid {

// Every source of randomness in a run is seeded from (master_seed, stream,
// index) so that independent components never share a generator and full
// runs are reproducible from one seed. Streams are separated with splitmix64.
enum class Stream : std::uint64_t {
  NetInit = 1,      // Q-network weight initialization
  EnvScale = 2,     // per-episode load scale draw (index = episode)
  Explore = 3,      // epsilon-greedy draws during training
  Replay = 4,       // minibatch sampling
  AttackTrain = 5,  // PGD random starts while training
  AttackEval = 6,   // PGD random starts during evaluation (index = episode)
  EvalEpisode = 7,  // evaluation episode seeds (index = episode)
  ProfilePick = 8,  // training profile selection
};

std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0);

std::mt19937_64 make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0);

}  // namespace voltgrid
