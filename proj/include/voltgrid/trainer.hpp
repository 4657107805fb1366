#pragma once

#include "voltgrid/attacks.hpp"
#include "voltgrid/env.hpp"
#include "voltgrid/qnet.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace voltgrid {

struct Transition {
  Eigen::VectorXd s;
  std::vector<int> heads;  // selected grid index per head
  double r = 0.0;
  Eigen::VectorXd s_next;  // possibly adversarial, as stored
  bool done = false;
};

// Fixed-capacity ring with FIFO eviction and uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return full_ ? capacity_ : slots_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& slot(std::size_t i) const { return slots_[i]; }

  std::vector<const Transition*> sample(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::vector<Transition> slots_;
  std::size_t capacity_;
  std::size_t next_ = 0;
  bool full_ = false;
};

enum class AttackDraw { PerEpisode, PerStep };

struct TrainConfig {
  int episodes = 9000;
  double gamma = 0.995;
  double lr = 5e-5;
  double eps_init = 1.0;
  double eps_final = 0.01;
  double eps_decay = 0.9995;  // multiplicative per episode
  int target_sync = 2000;    // gradient steps between target refreshes
  int batch_size = 512;
  int buffer_capacity = 100000;
  int warmup = 1000;  // transitions before updates start
  int hidden_layers = 4;
  int hidden_units = 512;

  AttackKind train_attack = AttackKind::None;
  AttackConfig attack;  // scope mask defaults to the voltage segment
  double p_attack = 0.5;
  int e_attack = 1000;
  AttackDraw attack_draw = AttackDraw::PerEpisode;

  std::vector<int> train_profiles = {0};
  double scale_min = 0.8;
  double scale_max = 1.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpisodeRecord {
  int episode = 0;
  double reward = 0.0;
  double epsilon = 0.0;
  bool attacked = false;
  double mean_loss = 0.0;
  int violations = 0;
};

struct TrainingLog {
  std::vector<EpisodeRecord> episodes;
  std::int64_t gradient_steps = 0;
  int target_syncs = 0;
};

struct TrainHooks {
  std::function<void(int, const QNetwork&, const EpisodeRecord&)> on_episode;
  // Called for every stored transition with the clean and stored next states.
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&)> on_store;
};

// Per-sample TD targets, one column per head: r + gamma * Q_target(s', a*)
// with a* the online network's argmax on the stored next state; r alone for
// terminal samples. Throws std::runtime_error on non-finite targets.
Eigen::MatrixXd ddqn_targets(const std::vector<const Transition*>& batch,
                             const QNetwork& online, const QNetwork& target, double gamma);

// Independent per-head exploration: each head is uniform-random with
// probability eps, greedy otherwise.
std::vector<int> epsilon_greedy(const QNetwork& net, const Eigen::VectorXd& state, double eps,
                                std::mt19937_64& rng);

struct TrainResult {
  QNetwork net;
  TrainingLog log;
};

// Offline adversarial DDQN training. When an episode is attacked (episode >=
// e_attack, one Bernoulli(p_attack) per episode by default), every stored
// next state in that episode is replaced by its adversarial counterpart
// before entering the buffer; rollout actions always see clean states.
TrainResult train(const TrainConfig& cfg, VoltVarEnv env, const TrainHooks& hooks = {});

}  // namespace voltgrid
