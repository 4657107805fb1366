#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace voltgrid {

enum class BusKind { Slack, PQ };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::PQ;
  double load_p_mw = 0.0;
  double load_q_mvar = 0.0;
  // Switchable shunt susceptance (p.u.), 0 when no capacitor is installed.
  double cb_susceptance_pu = 0.0;
};

struct Branch {
  int from = 0;
  int to = 0;
  double r_pu = 0.0;
  double x_pu = 0.0;
  // When true, an off-nominal tap ratio boosts the "to" side voltage.
  bool regulator = false;
};

// Radial distribution network. Bus ids are dense 0..N-1 and the branch set
// must form a connected tree with exactly one slack bus.
struct NetworkModel {
  std::string name;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  double base_mva = 10.0;
  double base_kv = 12.47;

  int slack() const;
  std::vector<int> regulator_branches() const;  // branch indices, ascending
  std::vector<int> capacitor_buses() const;     // bus ids, ascending
  double total_load_mw() const;

  // Throws std::invalid_argument on any structural violation.
  void validate() const;
};

// Net bus injections (generation minus load), MW / MVAr. The solver converts
// to per-unit internally; everything inside the flow math is per-unit.
struct Injections {
  std::vector<double> p_mw;
  std::vector<double> q_mvar;
};

struct AdmittanceMatrix {
  Eigen::MatrixXd g;
  Eigen::MatrixXd b;
};

struct PowerFlowOptions {
  double tolerance = 1e-8;  // max power mismatch, p.u.
  int max_iterations = 50;
};

struct PowerFlowSolution {
  Eigen::VectorXd v_mag;  // p.u.
  Eigen::VectorXd v_ang;  // rad, slack pinned at 0
  bool converged = false;
  int iterations = 0;
  double p_loss_mw = 0.0;
  double max_mismatch = 0.0;  // final residual, p.u.
  // Operating point the solve was run at, so the solution is self-describing.
  std::vector<double> taps;              // ratio per regulator branch
  std::vector<std::uint8_t> cb_status;   // on/off per capacitor bus
};

// Nodal admittance assembly. `taps` holds one ratio per regulator branch
// (ascending branch index, each within [0.9, 1.1]); `cb_status` one on/off
// flag per capacitor bus (ascending bus id). Shunt susceptances of switched-on
// capacitors land on the B diagonal. Throws on a singular branch (r = x = 0).
AdmittanceMatrix build_admittance(const NetworkModel& net,
                                  std::span<const double> taps,
                                  std::span<const std::uint8_t> cb_status);

// Full Newton-Raphson in polar form from a flat start. Non-convergence is
// reported through the `converged` flag, not an exception.
PowerFlowSolution solve_power_flow(const NetworkModel& net, const Injections& inj,
                                   std::span<const double> taps,
                                   std::span<const std::uint8_t> cb_status,
                                   const PowerFlowOptions& opts = {});

// Total series loss sum over branches of Re{U_drop * conj(I_branch)}, MW.
double compute_power_loss(const PowerFlowSolution& sol, const NetworkModel& net);

// P/Q injected at every bus implied by the solved voltages (MW, MVAr).
std::pair<Eigen::VectorXd, Eigen::VectorXd> bus_power_injections(const NetworkModel& net,
                                                                 const PowerFlowSolution& sol);

}  // namespace voltgrid
