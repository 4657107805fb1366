#include "voltgrid/qnet.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace voltgrid {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& q, double temperature) {
  Eigen::VectorXd z = (q.array() - q.maxCoeff()) / temperature;
  Eigen::VectorXd e = z.array().exp();
  return e / e.sum();
}

int argmax_first(const Eigen::VectorXd& q) {
  int best = 0;
  for (int i = 1; i < q.size(); ++i)
    if (q(i) > q(best)) best = i;
  return best;
}

}  // namespace

AdamState AdamState::init(std::int64_t param_count, double lr_in) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(param_count);
  s.v = Eigen::VectorXd::Zero(param_count);
  s.lr = lr_in;
  return s;
}

QNetwork QNetwork::init(const QNetConfig& cfg, std::uint64_t seed) {
  if (cfg.input_dim <= 0) throw std::invalid_argument("input_dim must be positive");
  if (cfg.head_sizes.empty()) throw std::invalid_argument("at least one head required");
  if (cfg.hidden_layers <= 0 || cfg.hidden_units <= 0)
    throw std::invalid_argument("trunk shape must be positive");

  QNetwork net;
  net.input_dim_ = cfg.input_dim;
  net.head_sizes_ = cfg.head_sizes;

  std::mt19937_64 rng(seed);
  auto make_layer = [&rng](int out, int in) {
    // He-style uniform fan-in init, zero biases.
    const double limit = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer l;
    l.w = Eigen::MatrixXd::NullaryExpr(out, in, [&] { return dist(rng); });
    l.b = Eigen::VectorXd::Zero(out);
    return l;
  };

  int in = cfg.input_dim;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    net.trunk_.push_back(make_layer(cfg.hidden_units, in));
    in = cfg.hidden_units;
  }
  for (int h : cfg.head_sizes) net.heads_.push_back(make_layer(h, in));
  return net;
}

std::vector<Eigen::VectorXd> QNetwork::forward(const Eigen::VectorXd& state) const {
  if (state.size() != input_dim_) throw std::invalid_argument("state length mismatch");
  Eigen::VectorXd a = state;
  for (const DenseLayer& l : trunk_) a = ((l.w * a + l.b).array().max(0.0)).matrix();
  std::vector<Eigen::VectorXd> out;
  out.reserve(heads_.size());
  for (const DenseLayer& h : heads_) out.push_back(h.w * a + h.b);
  return out;
}

std::vector<Eigen::MatrixXd> QNetwork::forward_batch(const Eigen::MatrixXd& states) const {
  if (states.cols() != input_dim_) throw std::invalid_argument("state width mismatch");
  Eigen::MatrixXd a = states;
  for (const DenseLayer& l : trunk_)
    a = (((a * l.w.transpose()).rowwise() + l.b.transpose()).array().max(0.0)).matrix();
  std::vector<Eigen::MatrixXd> out;
  out.reserve(heads_.size());
  for (const DenseLayer& h : heads_)
    out.push_back((a * h.w.transpose()).rowwise() + h.b.transpose());
  return out;
}

std::int64_t QNetwork::param_count() const {
  std::int64_t n = 0;
  for (const DenseLayer& l : trunk_) n += l.w.size() + l.b.size();
  for (const DenseLayer& l : heads_) n += l.w.size() + l.b.size();
  return n;
}

Eigen::VectorXd QNetwork::flat_params() const {
  Eigen::VectorXd theta(param_count());
  std::int64_t k = 0;
  auto put = [&](const DenseLayer& l) {
    theta.segment(k, l.w.size()) = Eigen::Map<const Eigen::VectorXd>(l.w.data(), l.w.size());
    k += l.w.size();
    theta.segment(k, l.b.size()) = l.b;
    k += l.b.size();
  };
  for (const DenseLayer& l : trunk_) put(l);
  for (const DenseLayer& l : heads_) put(l);
  return theta;
}

void QNetwork::set_flat_params(const Eigen::VectorXd& theta) {
  if (theta.size() != param_count()) throw std::invalid_argument("parameter size mismatch");
  std::int64_t k = 0;
  auto take = [&](DenseLayer& l) {
    Eigen::Map<Eigen::VectorXd>(l.w.data(), l.w.size()) = theta.segment(k, l.w.size());
    k += l.w.size();
    l.b = theta.segment(k, l.b.size());
    k += l.b.size();
  };
  for (DenseLayer& l : trunk_) take(l);
  for (DenseLayer& l : heads_) take(l);
}

bool QNetwork::same_shape(const QNetwork& other) const {
  return input_dim_ == other.input_dim_ && head_sizes_ == other.head_sizes_ &&
         trunk_.size() == other.trunk_.size() &&
         (trunk_.empty() || trunk_[0].w.rows() == other.trunk_[0].w.rows());
}

std::vector<int> greedy_action(const QNetwork& net, const Eigen::VectorXd& state) {
  const auto q = net.forward(state);
  std::vector<int> heads(q.size());
  for (std::size_t h = 0; h < q.size(); ++h) heads[h] = argmax_first(q[h]);
  return heads;
}

double surrogate_loss(const QNetwork& net, const Eigen::VectorXd& state, const LossSpec& spec) {
  const auto q = net.forward(state);
  if (spec.target_actions.size() != q.size())
    throw std::invalid_argument("one target action required per head");
  double j = 0.0;
  for (std::size_t h = 0; h < q.size(); ++h) {
    const int t = spec.target_actions[h];
    if (t < 0 || t >= q[h].size()) throw std::invalid_argument("target action out of range");
    const Eigen::VectorXd p = softmax(q[h], spec.temperature);
    j += std::log(std::max(p(t), 1e-300));
  }
  return j;
}

Eigen::VectorXd input_gradient(const QNetwork& net, const Eigen::VectorXd& state,
                               const LossSpec& spec) {
  if (state.size() != net.input_dim()) throw std::invalid_argument("state length mismatch");
  if (spec.target_actions.size() != static_cast<std::size_t>(net.head_count()))
    throw std::invalid_argument("one target action required per head");

  // Forward pass keeping pre-activations for the ReLU derivative.
  const auto& trunk = net.trunk();
  std::vector<Eigen::VectorXd> z(trunk.size());
  Eigen::VectorXd a = state;
  for (std::size_t l = 0; l < trunk.size(); ++l) {
    z[l] = trunk[l].w * a + trunk[l].b;
    a = z[l].array().max(0.0).matrix();
  }

  // dJ/d(head output) = (onehot(target) - softmax(q)) / temperature.
  Eigen::VectorXd da = Eigen::VectorXd::Zero(a.size());
  for (int h = 0; h < net.head_count(); ++h) {
    const DenseLayer& head = net.heads()[h];
    const Eigen::VectorXd q = head.w * a + head.b;
    Eigen::VectorXd dq = -softmax(q, spec.temperature);
    dq(spec.target_actions[h]) += 1.0;
    dq /= spec.temperature;
    da += head.w.transpose() * dq;
  }

  for (int l = static_cast<int>(trunk.size()) - 1; l >= 0; --l) {
    const Eigen::VectorXd dz =
        (da.array() * (z[l].array() > 0.0).cast<double>()).matrix();
    da = trunk[l].w.transpose() * dz;
  }
  return da;
}

namespace {

struct BatchForward {
  std::vector<Eigen::MatrixXd> z;  // pre-activations per trunk layer
  std::vector<Eigen::MatrixXd> a;  // activations, a[0] = input
  std::vector<Eigen::MatrixXd> q;  // head outputs
};

BatchForward forward_cached(const QNetwork& net, const Eigen::MatrixXd& states) {
  BatchForward f;
  f.a.push_back(states);
  for (const DenseLayer& l : net.trunk()) {
    f.z.push_back((f.a.back() * l.w.transpose()).rowwise() + l.b.transpose());
    f.a.push_back(f.z.back().array().max(0.0).matrix());
  }
  for (const DenseLayer& h : net.heads())
    f.q.push_back((f.a.back() * h.w.transpose()).rowwise() + h.b.transpose());
  return f;
}

}  // namespace

double td_loss(const QNetwork& net, const TdBatch& batch) {
  const auto q = net.forward_batch(batch.states);
  const int bsz = static_cast<int>(batch.states.rows());
  const int heads = net.head_count();
  double loss = 0.0;
  for (int h = 0; h < heads; ++h)
    for (int i = 0; i < bsz; ++i) {
      const double e = q[h](i, batch.actions(i, h)) - batch.targets(i, h);
      loss += e * e;
    }
  return loss / (bsz * heads);
}

double param_gradient_and_update(QNetwork& net, const TdBatch& batch, AdamState& adam,
                                 double clip_norm) {
  const int bsz = static_cast<int>(batch.states.rows());
  const int heads = net.head_count();
  if (bsz == 0) throw std::invalid_argument("empty batch");
  if (batch.actions.rows() != bsz || batch.targets.rows() != bsz ||
      batch.actions.cols() != heads || batch.targets.cols() != heads)
    throw std::invalid_argument("batch shape mismatch");

  const BatchForward f = forward_cached(net, batch.states);
  const std::size_t depth = net.trunk_.size();

  double loss = 0.0;
  // Backprop through the heads into the trunk output.
  Eigen::MatrixXd da = Eigen::MatrixXd::Zero(bsz, f.a.back().cols());
  std::vector<Eigen::MatrixXd> head_dw(heads);
  std::vector<Eigen::VectorXd> head_db(heads);
  const double scale = 2.0 / (static_cast<double>(bsz) * heads);
  for (int h = 0; h < heads; ++h) {
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(bsz, net.head_sizes_[h]);
    for (int i = 0; i < bsz; ++i) {
      const int a_i = batch.actions(i, h);
      const double e = f.q[h](i, a_i) - batch.targets(i, h);
      loss += e * e;
      dq(i, a_i) = scale * e;
    }
    head_dw[h] = dq.transpose() * f.a.back();
    head_db[h] = dq.colwise().sum();
    da += dq * net.heads_[h].w;
  }
  loss /= (static_cast<double>(bsz) * heads);
  if (!std::isfinite(loss))
    throw std::runtime_error("TD loss is not finite; update aborted");

  std::vector<Eigen::MatrixXd> trunk_dw(depth);
  std::vector<Eigen::VectorXd> trunk_db(depth);
  for (int l = static_cast<int>(depth) - 1; l >= 0; --l) {
    const Eigen::MatrixXd dz =
        (da.array() * (f.z[l].array() > 0.0).cast<double>()).matrix();
    trunk_dw[l] = dz.transpose() * f.a[l];
    trunk_db[l] = dz.colwise().sum();
    if (l > 0) da = dz * net.trunk_[l].w;
  }

  // Flatten in the same order as flat_params, clip, and apply Adam.
  Eigen::VectorXd grad(net.param_count());
  std::int64_t k = 0;
  auto put = [&](const Eigen::MatrixXd& dw, const Eigen::VectorXd& db) {
    grad.segment(k, dw.size()) = Eigen::Map<const Eigen::VectorXd>(dw.data(), dw.size());
    k += dw.size();
    grad.segment(k, db.size()) = db;
    k += db.size();
  };
  for (std::size_t l = 0; l < depth; ++l) put(trunk_dw[l], trunk_db[l]);
  for (int h = 0; h < heads; ++h) put(head_dw[h], head_db[h]);

  if (!grad.allFinite())
    throw std::runtime_error("TD gradient is not finite; update aborted");
  const double norm = grad.norm();
  if (norm > clip_norm) grad *= clip_norm / norm;

  adam.step += 1;
  adam.m = adam.beta1 * adam.m + (1.0 - adam.beta1) * grad;
  adam.v = adam.beta2 * adam.v + (1.0 - adam.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
  Eigen::VectorXd theta = net.flat_params();
  theta -= (adam.lr / bc1) * adam.m.cwiseQuotient(
               ((adam.v / bc2).cwiseSqrt().array() + adam.epsilon).matrix());
  net.set_flat_params(theta);
  return loss;
}

QNetwork sync_target(const QNetwork& net) { return net; }

void save_checkpoint(const QNetwork& net, const std::string& path) {
  nlohmann::json j;
  j["format"] = "voltgrid-qnet";
  j["version"] = 1;
  j["input_dim"] = net.input_dim();
  j["head_sizes"] = net.head_sizes();
  auto layer_json = [](const DenseLayer& l) {
    nlohmann::json lj;
    lj["rows"] = l.w.rows();
    lj["cols"] = l.w.cols();
    std::vector<double> w(l.w.size());
    // Row-major export so the file layout is independent of Eigen's storage.
    for (int r = 0; r < l.w.rows(); ++r)
      for (int c = 0; c < l.w.cols(); ++c) w[r * l.w.cols() + c] = l.w(r, c);
    lj["w"] = w;
    lj["b"] = std::vector<double>(l.b.data(), l.b.data() + l.b.size());
    return lj;
  };
  for (const DenseLayer& l : net.trunk()) j["trunk"].push_back(layer_json(l));
  for (const DenseLayer& l : net.heads()) j["heads"].push_back(layer_json(l));

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump();
}

QNetwork load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "voltgrid-qnet")
    throw std::runtime_error("unrecognized checkpoint format: " + path);

  auto layer_from = [](const nlohmann::json& lj) {
    DenseLayer l;
    const int rows = lj.at("rows").get<int>();
    const int cols = lj.at("cols").get<int>();
    const auto w = lj.at("w").get<std::vector<double>>();
    const auto b = lj.at("b").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != rows * cols || static_cast<int>(b.size()) != rows)
      throw std::runtime_error("checkpoint layer shape mismatch");
    l.w.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) l.w(r, c) = w[r * cols + c];
    l.b = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
    return l;
  };

  QNetConfig cfg;
  cfg.input_dim = j.at("input_dim").get<int>();
  cfg.head_sizes = j.at("head_sizes").get<std::vector<int>>();
  cfg.hidden_layers = static_cast<int>(j.at("trunk").size());
  cfg.hidden_units = j.at("trunk").at(0).at("rows").get<int>();
  QNetwork net = QNetwork::init(cfg, 0);

  std::vector<DenseLayer> trunk, heads;
  for (const auto& lj : j.at("trunk")) trunk.push_back(layer_from(lj));
  for (const auto& lj : j.at("heads")) heads.push_back(layer_from(lj));

  // Rebuild through the flat-parameter path to reuse shape checks.
  Eigen::VectorXd theta(net.param_count());
  std::int64_t k = 0;
  auto put = [&](const DenseLayer& l) {
    theta.segment(k, l.w.size()) = Eigen::Map<const Eigen::VectorXd>(l.w.data(), l.w.size());
    k += l.w.size();
    theta.segment(k, l.b.size()) = l.b;
    k += l.b.size();
  };
  for (const DenseLayer& l : trunk) put(l);
  for (const DenseLayer& l : heads) put(l);
  if (k != net.param_count()) throw std::runtime_error("checkpoint parameter count mismatch");
  net.set_flat_params(theta);
  return net;
}

}  // namespace voltgrid
