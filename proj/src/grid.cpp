#include "voltgrid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace voltgrid {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

int NetworkModel::slack() const {
  for (const Bus& b : buses)
    if (b.kind == BusKind::Slack) return b.id;
  throw std::invalid_argument("network has no slack bus");
}

std::vector<int> NetworkModel::regulator_branches() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(branches.size()); ++i)
    if (branches[i].regulator) out.push_back(i);
  return out;
}

std::vector<int> NetworkModel::capacitor_buses() const {
  std::vector<int> out;
  for (const Bus& b : buses)
    if (b.cb_susceptance_pu > 0.0) out.push_back(b.id);
  return out;
}

double NetworkModel::total_load_mw() const {
  double total = 0.0;
  for (const Bus& b : buses) total += b.load_p_mw;
  return total;
}

void NetworkModel::validate() const {
  const int n = static_cast<int>(buses.size());
  require(n >= 1, "network has no buses");
  require(base_mva > 0.0, "base_mva must be positive");

  int slack_count = 0;
  for (int i = 0; i < n; ++i) {
    const Bus& b = buses[i];
    require(b.id == i, "bus ids must be dense 0..N-1 and in order");
    require(std::isfinite(b.load_p_mw) && std::isfinite(b.load_q_mvar),
            "bus loads must be finite");
    require(b.cb_susceptance_pu >= 0.0, "shunt susceptance must be >= 0");
    if (b.kind == BusKind::Slack) ++slack_count;
  }
  require(slack_count == 1, "network must have exactly one slack bus");

  require(branches.size() == buses.size() - 1,
          "branch set must form a radial tree (|E| = N-1)");
  std::vector<std::vector<int>> adj(n);
  for (const Branch& br : branches) {
    require(br.from >= 0 && br.from < n && br.to >= 0 && br.to < n,
            "branch endpoint out of range");
    require(br.from != br.to, "branch endpoints must differ");
    require(br.r_pu >= 0.0, "branch resistance must be >= 0");
    require(br.r_pu > 0.0 || br.x_pu != 0.0, "singular branch (r = x = 0)");
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }

  // Connectivity by BFS from bus 0; with |E| = N-1 this certifies a tree.
  std::vector<char> seen(n, 0);
  std::vector<int> queue = {0};
  seen[0] = 1;
  for (std::size_t q = 0; q < queue.size(); ++q)
    for (int nb : adj[queue[q]])
      if (!seen[nb]) {
        seen[nb] = 1;
        queue.push_back(nb);
      }
  require(static_cast<int>(queue.size()) == n, "network graph is disconnected");
}

AdmittanceMatrix build_admittance(const NetworkModel& net,
                                  std::span<const double> taps,
                                  std::span<const std::uint8_t> cb_status) {
  net.validate();
  const auto reg = net.regulator_branches();
  const auto caps = net.capacitor_buses();
  require(taps.size() == reg.size(), "one tap ratio required per regulator branch");
  require(cb_status.size() == caps.size(), "one status flag required per capacitor bus");
  for (double t : taps)
    require(t >= 0.9 && t <= 1.1, "tap ratio outside [0.9, 1.1]");

  const int n = static_cast<int>(net.buses.size());
  AdmittanceMatrix y;
  y.g = Eigen::MatrixXd::Zero(n, n);
  y.b = Eigen::MatrixXd::Zero(n, n);

  std::size_t reg_pos = 0;
  for (const Branch& br : net.branches) {
    const double denom = br.r_pu * br.r_pu + br.x_pu * br.x_pu;
    require(denom > 0.0, "singular branch (r = x = 0)");
    const double g = br.r_pu / denom;
    const double b = -br.x_pu / denom;
    // Ideal tap of ratio t on the from side: at no load V_to = t * V_from.
    const double t = br.regulator ? taps[reg_pos++] : 1.0;
    const int f = br.from, k = br.to;
    y.g(f, f) += t * t * g;
    y.b(f, f) += t * t * b;
    y.g(k, k) += g;
    y.b(k, k) += b;
    y.g(f, k) -= t * g;
    y.b(f, k) -= t * b;
    y.g(k, f) -= t * g;
    y.b(k, f) -= t * b;
  }

  for (std::size_t c = 0; c < caps.size(); ++c)
    if (cb_status[c]) y.b(caps[c], caps[c]) += net.buses[caps[c]].cb_susceptance_pu;

  return y;
}

namespace {

// P_i and Q_i implied by (v, theta) through the admittance matrix, p.u.
void calc_injections(const AdmittanceMatrix& y, const Eigen::VectorXd& v,
                     const Eigen::VectorXd& th, Eigen::VectorXd& p, Eigen::VectorXd& q) {
  const int n = static_cast<int>(v.size());
  p.setZero(n);
  q.setZero(n);
  for (int i = 0; i < n; ++i) {
    double pi = 0.0, qi = 0.0;
    for (int j = 0; j < n; ++j) {
      const double gij = y.g(i, j), bij = y.b(i, j);
      if (gij == 0.0 && bij == 0.0) continue;
      const double dth = th(i) - th(j);
      const double c = std::cos(dth), s = std::sin(dth);
      pi += v(j) * (gij * c + bij * s);
      qi += v(j) * (gij * s - bij * c);
    }
    p(i) = v(i) * pi;
    q(i) = v(i) * qi;
  }
}

}  // namespace

PowerFlowSolution solve_power_flow(const NetworkModel& net, const Injections& inj,
                                   std::span<const double> taps,
                                   std::span<const std::uint8_t> cb_status,
                                   const PowerFlowOptions& opts) {
  const int n = static_cast<int>(net.buses.size());
  require(static_cast<int>(inj.p_mw.size()) == n && static_cast<int>(inj.q_mvar.size()) == n,
          "injection vectors must match bus count");

  const AdmittanceMatrix y = build_admittance(net, taps, cb_status);
  const int slack = net.slack();

  Eigen::VectorXd p_spec(n), q_spec(n);
  for (int i = 0; i < n; ++i) {
    p_spec(i) = inj.p_mw[i] / net.base_mva;
    q_spec(i) = inj.q_mvar[i] / net.base_mva;
  }

  // Unknown ordering: angles then magnitudes of the non-slack (PQ) buses.
  std::vector<int> pq;
  for (int i = 0; i < n; ++i)
    if (i != slack) pq.push_back(i);
  const int m = static_cast<int>(pq.size());

  PowerFlowSolution sol;
  sol.v_mag = Eigen::VectorXd::Ones(n);
  sol.v_ang = Eigen::VectorXd::Zero(n);
  sol.taps.assign(taps.begin(), taps.end());
  sol.cb_status.assign(cb_status.begin(), cb_status.end());

  Eigen::VectorXd p_calc(n), q_calc(n);
  Eigen::VectorXd mismatch(2 * m);
  Eigen::MatrixXd jac(2 * m, 2 * m);

  for (int iter = 0; iter <= opts.max_iterations; ++iter) {
    calc_injections(y, sol.v_mag, sol.v_ang, p_calc, q_calc);
    for (int a = 0; a < m; ++a) {
      mismatch(a) = p_spec(pq[a]) - p_calc(pq[a]);
      mismatch(m + a) = q_spec(pq[a]) - q_calc(pq[a]);
    }
    sol.max_mismatch = m == 0 ? 0.0 : mismatch.cwiseAbs().maxCoeff();
    sol.iterations = iter;
    if (sol.max_mismatch <= opts.tolerance) {
      sol.converged = true;
      break;
    }
    if (iter == opts.max_iterations) break;

    for (int a = 0; a < m; ++a) {
      const int i = pq[a];
      const double vi = sol.v_mag(i);
      for (int bcol = 0; bcol < m; ++bcol) {
        const int j = pq[bcol];
        if (i == j) {
          jac(a, bcol) = -q_calc(i) - y.b(i, i) * vi * vi;
          jac(a, m + bcol) = p_calc(i) / vi + y.g(i, i) * vi;
          jac(m + a, bcol) = p_calc(i) - y.g(i, i) * vi * vi;
          jac(m + a, m + bcol) = q_calc(i) / vi - y.b(i, i) * vi;
        } else {
          const double vj = sol.v_mag(j);
          const double dth = sol.v_ang(i) - sol.v_ang(j);
          const double c = std::cos(dth), s = std::sin(dth);
          const double gij = y.g(i, j), bij = y.b(i, j);
          jac(a, bcol) = vi * vj * (gij * s - bij * c);
          jac(a, m + bcol) = vi * (gij * c + bij * s);
          jac(m + a, bcol) = -vi * vj * (gij * c + bij * s);
          jac(m + a, m + bcol) = vi * (gij * s - bij * c);
        }
      }
    }

    Eigen::VectorXd dx = jac.partialPivLu().solve(mismatch);
    if (!dx.allFinite()) break;  // singular Jacobian, voltage collapse
    for (int a = 0; a < m; ++a) {
      sol.v_ang(pq[a]) += dx(a);
      sol.v_mag(pq[a]) += dx(m + a);
    }
    if ((sol.v_mag.array() <= 0.05).any()) break;  // collapsed magnitude
  }

  if (sol.converged) sol.p_loss_mw = compute_power_loss(sol, net);
  return sol;
}

double compute_power_loss(const PowerFlowSolution& sol, const NetworkModel& net) {
  using cx = std::complex<double>;
  const auto reg = net.regulator_branches();
  std::size_t reg_pos = 0;
  double loss_pu = 0.0;
  for (const Branch& br : net.branches) {
    const double t = br.regulator ? sol.taps.at(reg_pos++) : 1.0;
    const double denom = br.r_pu * br.r_pu + br.x_pu * br.x_pu;
    const double g = br.r_pu / denom;
    const cx vf = std::polar(sol.v_mag(br.from), sol.v_ang(br.from));
    const cx vt = std::polar(sol.v_mag(br.to), sol.v_ang(br.to));
    const cx drop = t * vf - vt;  // across the series impedance
    loss_pu += std::norm(drop) * g;
  }
  return loss_pu * net.base_mva;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> bus_power_injections(const NetworkModel& net,
                                                                 const PowerFlowSolution& sol) {
  const AdmittanceMatrix y = build_admittance(net, sol.taps, sol.cb_status);
  Eigen::VectorXd p, q;
  calc_injections(y, sol.v_mag, sol.v_ang, p, q);
  return {p * net.base_mva, q * net.base_mva};
}

}  // namespace voltgrid
