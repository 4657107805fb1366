#include "voltgrid/attacks.hpp"

#include <algorithm>
#include <stdexcept>

namespace voltgrid {

const char* to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::Fgsm: return "fgsm";
    case AttackKind::Pgd: return "pgd";
  }
  return "?";
}

AttackKind attack_kind_from_string(const std::string& name) {
  if (name == "none") return AttackKind::None;
  if (name == "fgsm") return AttackKind::Fgsm;
  if (name == "pgd") return AttackKind::Pgd;
  throw std::invalid_argument("unknown attack kind: " + name);
}

void AttackConfig::validate(int state_dim) const {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (!(alpha > 0.0 && alpha <= delta))
    throw std::invalid_argument("alpha must satisfy 0 < alpha <= delta");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (steps * alpha < delta)
    throw std::invalid_argument("steps * alpha must reach delta");
  if (static_cast<int>(scope_mask.size()) != state_dim)
    throw std::invalid_argument("scope mask length must match state length");
}

std::vector<int> worst_actions(const QNetwork& net, const Eigen::VectorXd& state) {
  const auto q = net.forward(state);
  std::vector<int> heads(q.size());
  for (std::size_t h = 0; h < q.size(); ++h) {
    int best = 0;
    for (int i = 1; i < q[h].size(); ++i)
      if (q[h](i) < q[h](best)) best = i;
    heads[h] = best;
  }
  return heads;
}

Eigen::VectorXd project_linf(const Eigen::VectorXd& candidate, const Eigen::VectorXd& center,
                             double delta) {
  if (candidate.size() != center.size()) throw std::invalid_argument("length mismatch");
  Eigen::VectorXd out(candidate.size());
  for (int i = 0; i < candidate.size(); ++i)
    out(i) = std::clamp(candidate(i), center(i) - delta, center(i) + delta);
  return out;
}

namespace {

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

PerturbedState finish(const Eigen::VectorXd& state, Eigen::VectorXd eta,
                      const AttackConfig& cfg, AttackKind kind) {
  PerturbedState p;
  p.kind = kind;
  p.eta = std::move(eta);
  p.s_adv = state + p.eta;
  for (std::size_t i = 0; i < cfg.scope_mask.size(); ++i) {
    if (!cfg.scope_mask[i]) continue;
    ++p.masked_count;
    if (std::abs(p.eta(static_cast<int>(i))) >= cfg.delta - 1e-9) ++p.at_max_count;
  }
  return p;
}

}  // namespace

PerturbedState fgsm(const QNetwork& net, const Eigen::VectorXd& state, const AttackConfig& cfg) {
  cfg.validate(static_cast<int>(state.size()));
  const LossSpec spec{worst_actions(net, state), 1.0};
  const Eigen::VectorXd g = input_gradient(net, state, spec);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(state.size());
  for (int i = 0; i < state.size(); ++i)
    if (cfg.scope_mask[i]) eta(i) = cfg.delta * sign0(g(i));
  return finish(state, std::move(eta), cfg, AttackKind::Fgsm);
}

PerturbedState pgd(const QNetwork& net, const Eigen::VectorXd& state, const AttackConfig& cfg,
                   std::mt19937_64& rng) {
  cfg.validate(static_cast<int>(state.size()));
  const LossSpec spec{worst_actions(net, state), 1.0};

  // The perturbation is tracked directly so the projection is an exact clamp
  // to [-delta, delta] regardless of the state's magnitude.
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(state.size());
  if (cfg.random_start) {
    std::uniform_real_distribution<double> dist(-cfg.delta, cfg.delta);
    for (int i = 0; i < state.size(); ++i)
      if (cfg.scope_mask[i]) eta(i) = dist(rng);
  }

  for (int k = 0; k < cfg.steps; ++k) {
    const Eigen::VectorXd g = input_gradient(net, state + eta, spec);
    for (int i = 0; i < state.size(); ++i) {
      if (!cfg.scope_mask[i]) continue;
      eta(i) = std::clamp(eta(i) + cfg.alpha * sign0(g(i)), -cfg.delta, cfg.delta);
    }
  }
  return finish(state, std::move(eta), cfg, AttackKind::Pgd);
}

PerturbedState apply_attack(AttackKind kind, const QNetwork& net, const Eigen::VectorXd& state,
                            const AttackConfig& cfg, std::mt19937_64& rng) {
  switch (kind) {
    case AttackKind::Fgsm: return fgsm(net, state, cfg);
    case AttackKind::Pgd: return pgd(net, state, cfg, rng);
    case AttackKind::None: break;
  }
  PerturbedState p;
  p.s_adv = state;
  p.eta = Eigen::VectorXd::Zero(state.size());
  return p;
}

}  // namespace voltgrid
