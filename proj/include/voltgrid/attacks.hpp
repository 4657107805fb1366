#pragma once

#include "voltgrid/qnet.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace voltgrid {

enum class AttackKind { None, Fgsm, Pgd };

const char* to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);  // throws on unknown

// l-inf attack parameters. The scope mask restricts perturbations to a subset
// of state entries (the voltage-magnitude segment in this artifact).
struct AttackConfig {
  double delta = 0.1;
  double alpha = 0.0125;
  int steps = 20;
  bool random_start = true;
  std::vector<std::uint8_t> scope_mask;

  // Requires 0 < alpha <= delta, steps >= 1, steps * alpha >= delta (the ball
  // boundary stays reachable) and a mask matching the state length.
  void validate(int state_dim) const;
};

struct PerturbedState {
  Eigen::VectorXd s_adv;
  Eigen::VectorXd eta;
  AttackKind kind = AttackKind::None;
  int at_max_count = 0;   // masked entries with |eta| >= delta - 1e-9
  int masked_count = 0;
};

// Per-head argmin with lowest-index tie-break: the action the attacker steers
// the policy toward.
std::vector<int> worst_actions(const QNetwork& net, const Eigen::VectorXd& state);

// Per-entry clamp of `candidate` onto [center - delta, center + delta].
Eigen::VectorXd project_linf(const Eigen::VectorXd& candidate, const Eigen::VectorXd& center,
                             double delta);

// Single-step sign-gradient attack; sign(0) contributes no perturbation.
PerturbedState fgsm(const QNetwork& net, const Eigen::VectorXd& state, const AttackConfig& cfg);

// Iterated sign-gradient ascent with projection onto the l-inf ball around
// the clean state. The steering target is fixed at the clean state's worst
// actions. With steps = 1, no random start and alpha = delta this reproduces
// fgsm bit for bit.
PerturbedState pgd(const QNetwork& net, const Eigen::VectorXd& state, const AttackConfig& cfg,
                   std::mt19937_64& rng);

PerturbedState apply_attack(AttackKind kind, const QNetwork& net, const Eigen::VectorXd& state,
                            const AttackConfig& cfg, std::mt19937_64& rng);

}  // namespace voltgrid
