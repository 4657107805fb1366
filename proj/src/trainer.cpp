#include "voltgrid/trainer.hpp"

#include "voltgrid/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace voltgrid {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("buffer capacity must be positive");
  slots_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (!full_ && slots_.size() < capacity_) {
    slots_.push_back(std::move(t));
    if (slots_.size() == capacity_) full_ = true;
    return;
  }
  slots_[next_] = std::move(t);  // overwrite oldest
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch,
                                                    std::mt19937_64& rng) const {
  if (size() < batch) throw std::logic_error("buffer smaller than batch");
  std::uniform_int_distribution<std::size_t> pick(0, size() - 1);
  std::vector<const Transition*> out(batch);
  for (std::size_t i = 0; i < batch; ++i) out[i] = &slots_[pick(rng)];
  return out;
}

void TrainConfig::validate() const {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0, 1]");
  if (!(p_attack >= 0.0 && p_attack <= 1.0))
    throw std::invalid_argument("p_attack must be in [0, 1]");
  if (e_attack < 0) throw std::invalid_argument("e_attack must be >= 0");
  if (batch_size < 1 || warmup < batch_size)
    throw std::invalid_argument("warmup must be >= batch_size");
  if (buffer_capacity < warmup) throw std::invalid_argument("capacity must be >= warmup");
  if (target_sync < 1) throw std::invalid_argument("target_sync must be >= 1");
  if (train_profiles.empty()) throw std::invalid_argument("no training profiles");
}

Eigen::MatrixXd ddqn_targets(const std::vector<const Transition*>& batch,
                             const QNetwork& online, const QNetwork& target, double gamma) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int bsz = static_cast<int>(batch.size());
  const int heads = online.head_count();

  Eigen::MatrixXd next_states(bsz, online.input_dim());
  for (int i = 0; i < bsz; ++i) next_states.row(i) = batch[i]->s_next.transpose();

  // Online net picks the action, target net evaluates it.
  const auto q_online = online.forward_batch(next_states);
  const auto q_target = target.forward_batch(next_states);

  Eigen::MatrixXd y(bsz, heads);
  for (int i = 0; i < bsz; ++i) {
    const Transition& t = *batch[i];
    for (int h = 0; h < heads; ++h) {
      if (t.done) {
        y(i, h) = t.r;
        continue;
      }
      int best = 0;
      for (int a = 1; a < q_online[h].cols(); ++a)
        if (q_online[h](i, a) > q_online[h](i, best)) best = a;
      y(i, h) = t.r + gamma * q_target[h](i, best);
    }
  }
  if (!y.allFinite()) throw std::runtime_error("non-finite TD target");
  return y;
}

std::vector<int> epsilon_greedy(const QNetwork& net, const Eigen::VectorXd& state, double eps,
                                std::mt19937_64& rng) {
  if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("epsilon must be in [0, 1]");
  const auto& sizes = net.head_sizes();
  std::vector<int> heads(sizes.size());
  std::vector<int> greedy;  // computed lazily, only when some head exploits
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t h = 0; h < sizes.size(); ++h) {
    if (coin(rng) < eps) {
      heads[h] = std::uniform_int_distribution<int>(0, sizes[h] - 1)(rng);
    } else {
      if (greedy.empty()) greedy = greedy_action(net, state);
      heads[h] = greedy[h];
    }
  }
  return heads;
}

TrainResult train(const TrainConfig& cfg, VoltVarEnv env, const TrainHooks& hooks) {
  cfg.validate();

  AttackConfig attack = cfg.attack;
  if (attack.scope_mask.empty()) attack.scope_mask = env.layout().voltage_mask();
  if (cfg.train_attack != AttackKind::None) attack.validate(env.layout().size());

  QNetConfig net_cfg;
  net_cfg.input_dim = env.layout().size();
  net_cfg.head_sizes = env.head_sizes();
  net_cfg.hidden_layers = cfg.hidden_layers;
  net_cfg.hidden_units = cfg.hidden_units;

  QNetwork net = QNetwork::init(net_cfg, derive_seed(cfg.seed, Stream::NetInit));
  QNetwork target = sync_target(net);
  AdamState adam = AdamState::init(net.param_count(), cfg.lr);

  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  auto explore_rng = make_rng(cfg.seed, Stream::Explore);
  auto replay_rng = make_rng(cfg.seed, Stream::Replay);
  auto attack_rng = make_rng(cfg.seed, Stream::AttackTrain);
  auto profile_rng = make_rng(cfg.seed, Stream::ProfilePick);

  TrainResult result;
  result.log.episodes.reserve(cfg.episodes);
  std::int64_t grad_steps = 0;
  int syncs = 0;

  const bool attacks_possible = cfg.train_attack != AttackKind::None && cfg.p_attack > 0.0;
  std::bernoulli_distribution attack_coin(cfg.p_attack);

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const double eps = std::max(cfg.eps_final,
                                cfg.eps_init * std::pow(cfg.eps_decay, static_cast<double>(ep)));
    const int profile =
        cfg.train_profiles[std::uniform_int_distribution<std::size_t>(
            0, cfg.train_profiles.size() - 1)(profile_rng)];

    EpisodeConfig ep_cfg;
    ep_cfg.profile_id = profile;
    ep_cfg.scale_min = cfg.scale_min;
    ep_cfg.scale_max = cfg.scale_max;
    ep_cfg.seed = derive_seed(cfg.seed, Stream::EnvScale, static_cast<std::uint64_t>(ep));
    Eigen::VectorXd s = env.reset(ep_cfg);

    const bool episode_attacked = attacks_possible && ep >= cfg.e_attack &&
                                  cfg.attack_draw == AttackDraw::PerEpisode &&
                                  attack_coin(attack_rng);

    EpisodeRecord rec;
    rec.episode = ep;
    rec.epsilon = eps;
    double loss_sum = 0.0;
    int loss_count = 0;
    bool any_attacked = episode_attacked;

    bool done = false;
    while (!done) {
      const std::vector<int> heads = epsilon_greedy(net, s, eps, explore_rng);
      const auto step = env.step(env.action_from_heads(heads));
      done = step.done;
      rec.reward += step.reward.total;
      rec.violations += step.info.violations;

      bool attack_now = episode_attacked;
      if (attacks_possible && cfg.attack_draw == AttackDraw::PerStep && ep >= cfg.e_attack)
        attack_now = attack_coin(attack_rng);
      any_attacked = any_attacked || attack_now;

      Eigen::VectorXd stored_next = step.state;
      if (attack_now)
        stored_next = apply_attack(cfg.train_attack, net, step.state, attack, attack_rng).s_adv;
      if (hooks.on_store) hooks.on_store(step.state, stored_next);

      buffer.push({s, heads, step.reward.total, stored_next, done});
      s = step.state;

      if (buffer.size() >= static_cast<std::size_t>(cfg.warmup)) {
        const auto batch = buffer.sample(static_cast<std::size_t>(cfg.batch_size), replay_rng);
        TdBatch td;
        td.states.resize(batch.size(), net.input_dim());
        td.actions.resize(batch.size(), net.head_count());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          td.states.row(i) = batch[i]->s.transpose();
          for (int h = 0; h < net.head_count(); ++h) td.actions(i, h) = batch[i]->heads[h];
        }
        td.targets = ddqn_targets(batch, net, target, cfg.gamma);
        loss_sum += param_gradient_and_update(net, td, adam);
        ++loss_count;
        ++grad_steps;
        if (grad_steps % cfg.target_sync == 0) {
          target = sync_target(net);
          ++syncs;
        }
      }
    }

    rec.attacked = any_attacked;
    rec.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    result.log.episodes.push_back(rec);
    if (hooks.on_episode) hooks.on_episode(ep, net, rec);
  }

  result.log.gradient_steps = grad_steps;
  result.log.target_syncs = syncs;
  result.net = std::move(net);
  return result;
}

}  // namespace voltgrid
