#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace voltgrid {

struct QNetConfig {
  int input_dim = 0;
  std::vector<int> head_sizes;
  int hidden_layers = 4;
  int hidden_units = 512;
};

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;
};

struct TdBatch {
  Eigen::MatrixXd states;   // B x input_dim, one sample per row
  Eigen::MatrixXi actions;  // B x heads, selected grid indices
  Eigen::MatrixXd targets;  // B x heads
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState init(std::int64_t param_count, double lr = 5e-5);
};

// Surrogate loss for attack generation: per head, log-probability of the
// target action under a softmax over that head's Q-values. Ascending its
// state gradient pushes the policy toward the target actions.
struct LossSpec {
  std::vector<int> target_actions;
  double temperature = 1.0;
};

// Shared ReLU trunk with one linear output head per device. Value semantics:
// copying the object snapshots the parameters.
class QNetwork {
 public:
  QNetwork() = default;

  static QNetwork init(const QNetConfig& cfg, std::uint64_t seed);

  std::vector<Eigen::VectorXd> forward(const Eigen::VectorXd& state) const;
  // Batched variant; rows are samples.
  std::vector<Eigen::MatrixXd> forward_batch(const Eigen::MatrixXd& states) const;

  int input_dim() const { return input_dim_; }
  const std::vector<int>& head_sizes() const { return head_sizes_; }
  int head_count() const { return static_cast<int>(head_sizes_.size()); }
  const std::vector<DenseLayer>& trunk() const { return trunk_; }
  const std::vector<DenseLayer>& heads() const { return heads_; }

  std::int64_t param_count() const;
  Eigen::VectorXd flat_params() const;
  void set_flat_params(const Eigen::VectorXd& theta);

  bool same_shape(const QNetwork& other) const;

 private:
  friend double param_gradient_and_update(QNetwork&, const TdBatch&, AdamState&, double);

  int input_dim_ = 0;
  std::vector<int> head_sizes_;
  std::vector<DenseLayer> trunk_;
  std::vector<DenseLayer> heads_;
};

// Per-head argmax with lowest-index tie-break.
std::vector<int> greedy_action(const QNetwork& net, const Eigen::VectorXd& state);

double surrogate_loss(const QNetwork& net, const Eigen::VectorXd& state, const LossSpec& spec);

// Exact gradient of the surrogate loss with respect to the state entries.
Eigen::VectorXd input_gradient(const QNetwork& net, const Eigen::VectorXd& state,
                               const LossSpec& spec);

// Mean over batch and heads of the squared TD error at the selected actions.
double td_loss(const QNetwork& net, const TdBatch& batch);

// One Adam step on the TD loss; gradients are clipped at `clip_norm` (global
// L2). Returns the pre-update loss. Throws std::runtime_error when the loss
// or gradient is not finite.
double param_gradient_and_update(QNetwork& net, const TdBatch& batch, AdamState& adam,
                                 double clip_norm = 10.0);

// Frozen deep copy for use as a target network.
QNetwork sync_target(const QNetwork& net);

// Versioned JSON checkpoint, exact round trip of all parameters.
void save_checkpoint(const QNetwork& net, const std::string& path);
QNetwork load_checkpoint(const std::string& path);

}  // namespace voltgrid
