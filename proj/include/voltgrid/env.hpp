#pragma once

#include "voltgrid/devices.hpp"
#include "voltgrid/grid.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace voltgrid {

// Observations are flat vectors; StateLayout maps index ranges to roles:
// [ |U| per bus | soc per battery | tap per regulator | cb status | si level ].
// Taps and inverter levels are normalized affinely to [-1, 1].
using StateVector = Eigen::VectorXd;

struct StateLayout {
  int n_bus = 0;
  int n_bat = 0;
  int n_reg = 0;
  int n_cb = 0;
  int n_si = 0;

  int size() const { return n_bus + n_bat + n_reg + n_cb + n_si; }
  int voltage_begin() const { return 0; }
  int soc_begin() const { return n_bus; }
  int tap_begin() const { return n_bus + n_bat; }
  int cb_begin() const { return n_bus + n_bat + n_reg; }
  int si_begin() const { return n_bus + n_bat + n_reg + n_cb; }

  // 1 on the voltage-magnitude segment, 0 elsewhere.
  std::vector<std::uint8_t> voltage_mask() const;

  bool operator==(const StateLayout&) const = default;
};

// One discrete grid index per device head. Regulator entries are grid indices
// 0..32; position = index - 16.
struct ActionVector {
  std::vector<int> si_levels;
  std::vector<int> cb_statuses;
  std::vector<int> taps;
  std::vector<int> bat_levels;
};

struct RewardParams {
  double c_v = 100.0;   // voltage-band penalty weight, per-unit^-2
  double c_p = 1.0;     // normalized-loss weight
  double c_sw = 0.1;    // per discrete switch (cb toggle or tap step)
  double c_si = 0.05;   // per unit of normalized inverter setpoint change
  double c_bat = 0.05;  // per unit of normalized battery throughput
  double r_div = 1000.0;
  double band_lo = 0.95;
  double band_hi = 1.05;
};

struct RewardBreakdown {
  double f_volt = 0.0;
  double f_ctrl = 0.0;
  double f_power = 0.0;
  double total = 0.0;  // always -(f_volt + f_ctrl + f_power)
};

// Daily shape: multiplicative load scale plus PV output scale, 24 entries.
struct LoadProfile {
  std::vector<double> load_scale;
  std::vector<double> pv_scale;
};

struct EpisodeConfig {
  int horizon = 24;
  int profile_id = 0;
  double scale_min = 0.8;
  double scale_max = 1.2;
  std::uint64_t seed = 0;
};

struct StepInfo {
  double p_loss_mw = 0.0;
  int violations = 0;
  bool converged = true;
};

// Device movement between consecutive timesteps, feeding the control penalty.
struct DeviceDelta {
  int cb_toggles = 0;
  int tap_steps = 0;       // sum of |tap position change| over regulators
  double si_effort = 0.0;  // sum of |dQ| / Q_max over inverters
  double bat_effort = 0.0; // sum of |p| / p_max over batteries
};

RewardBreakdown compute_reward(const RewardParams& rp, const Eigen::VectorXd& v_mag,
                               double p_loss_mw, double p_load_mw, const DeviceDelta& delta);

int count_band_violations(const Eigen::VectorXd& v_mag, double lo, double hi);

// Everything needed to instantiate an environment; shared read-only between
// env copies so parallel evaluation episodes stay cheap.
struct EnvSpec {
  NetworkModel network;
  DeviceFleet fleet;
  std::vector<LoadProfile> profiles;
  RewardParams reward;
};

// Finite-horizon Volt-Var MDP. One instance is single-threaded; independent
// copies may run concurrently.
class VoltVarEnv {
 public:
  explicit VoltVarEnv(std::shared_ptr<const EnvSpec> spec);

  const StateLayout& layout() const { return layout_; }
  const EnvSpec& spec() const { return *spec_; }

  StateVector reset(const EpisodeConfig& cfg);

  struct StepResult {
    StateVector state;
    RewardBreakdown reward;
    bool done = false;
    StepInfo info;
  };
  StepResult step(const ActionVector& action);

  const PowerFlowSolution& last_solution() const { return solution_; }
  int time() const { return t_; }
  bool episode_active() const { return active_; }
  double episode_scale() const { return scale_; }

  // Head bridging for the factored Q-network: heads are ordered
  // [inverters..., capacitors..., regulators..., batteries...].
  std::vector<int> head_sizes() const;
  std::vector<int> neutral_heads() const;
  ActionVector action_from_heads(std::span<const int> heads) const;
  std::vector<int> heads_from_action(const ActionVector& a) const;

 private:
  StateVector assemble_state() const;
  Injections current_injections(int t) const;
  void validate_action(const ActionVector& a) const;

  std::shared_ptr<const EnvSpec> spec_;
  StateLayout layout_;
  DeviceFleet fleet_;  // mutable per-episode device states
  PowerFlowSolution solution_;
  int t_ = 0;
  int horizon_ = 24;
  int profile_ = 0;
  double scale_ = 1.0;
  bool active_ = false;
};

// Segment views of a state vector, and their exact inverse.
struct DecodedState {
  Eigen::VectorXd v_mag;
  Eigen::VectorXd soc;
  Eigen::VectorXd tap_norm;
  Eigen::VectorXd cb_status;
  Eigen::VectorXd si_norm;
};

DecodedState decode_state(const StateLayout& layout, const StateVector& s);
StateVector encode_state(const StateLayout& layout, const DecodedState& d);

}  // namespace voltgrid
