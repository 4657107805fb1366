#pragma once

#include "voltgrid/attacks.hpp"
#include "voltgrid/env.hpp"
#include "voltgrid/qnet.hpp"

#include <memory>
#include <string>
#include <vector>

namespace voltgrid {

struct EvalConfig {
  AttackKind attack = AttackKind::None;
  AttackConfig attack_cfg;
  int episodes = 50;
  std::uint64_t seed = 0;
  std::vector<int> profiles = {0};
  double scale_min = 0.8;
  double scale_max = 1.2;
  int workers = 1;
};

struct EvalMetrics {
  double mean_reward = 0.0;
  double q_value_reduction = 0.0;
  long total_voltage_violations = 0;
  double violations_per_timestep = 0.0;
  double pct_at_max_delta = 0.0;      // share of masked entries saturating delta
  double switches_per_timestep = 0.0; // heads changed between consecutive steps
  int episodes = 0;
};

struct EpisodeTrace {
  int episode = 0;
  int profile = 0;
  double reward = 0.0;
  int violations = 0;
  int switches = 0;
  double q_reduction_sum = 0.0;
  int q_reduction_steps = 0;
  long at_max = 0;
  long masked = 0;
  double p_loss_mw_mean = 0.0;
  bool diverged = false;
  std::vector<Eigen::VectorXd> v_mag;       // physical trajectory per step
  std::vector<std::vector<int>> heads;      // actions taken
};

struct VoltageEnvelopeRow {
  double vmin = 0.0;
  double vmean = 0.0;
  double vmax = 0.0;
};

struct VoltageEnvelope {
  std::vector<VoltageEnvelopeRow> rows;  // one per timestep
};

// Value lost by deciding on the corrupted observation, measured on the clean
// state with the agent's own network.
double q_value_reduction_step(const QNetwork& net, const Eigen::VectorXd& s,
                              const Eigen::VectorXd& s_adv);

long count_violations(const std::vector<Eigen::VectorXd>& v_mags, double lo = 0.95,
                      double hi = 1.05);

VoltageEnvelope voltage_envelope(const std::vector<EpisodeTrace>& traces);

struct EvalResult {
  EvalMetrics metrics;
  std::vector<EpisodeTrace> traces;
};

// Greedy rollouts over `episodes` independent episodes. Under attack the
// policy acts on the perturbed observation while the environment evolves
// from the true state. Episodes use seeds derived from (seed, episode), so
// results are identical for any worker count.
EvalResult evaluate(const QNetwork& net, std::shared_ptr<const EnvSpec> spec,
                    const EvalConfig& cfg);

struct CrossAttackCell {
  std::string train_attack;
  std::string test_attack;
  EvalMetrics metrics;
};

// Full grid of agents x test attacks (including "none").
std::vector<CrossAttackCell> cross_attack_matrix(
    const std::vector<std::pair<std::string, const QNetwork*>>& agents,
    std::shared_ptr<const EnvSpec> spec, const EvalConfig& base);

}  // namespace voltgrid
