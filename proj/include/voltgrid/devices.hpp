#pragma once

#include <vector>

namespace voltgrid {

// Discrete action grids shared by the control devices.
inline constexpr int kSiLevels = 21;   // a_si in {-1.0, -0.9, ..., 1.0}
inline constexpr int kCbLevels = 2;    // off / on
inline constexpr int kTapLevels = 33;  // positions -16..16
inline constexpr int kBatLevels = 33;  // a_bat in {-1, -1+d, ..., 1}, d = 1/16

inline constexpr int kSiNeutralLevel = 10;   // a = 0
inline constexpr int kTapNeutralLevel = 16;  // position 0
inline constexpr int kBatNeutralLevel = 16;  // a = 0

inline constexpr double kTapStepPu = 0.00625;  // per tap position
inline constexpr double kBatStep = 0.0625;

// Reactive-power control interface of a PV plant. `p_output_mw` is set from
// the generation profile each timestep.
struct SmartInverter {
  int bus = 0;
  double s_rating_mva = 0.0;
  double p_rating_mw = 0.0;  // profile scale of 1.0 maps to this output
  double p_output_mw = 0.0;
  int level = kSiNeutralLevel;
  double q_output_mvar = 0.0;
};

struct CapacitorBank {
  int bus = 0;
  double susceptance_pu = 0.0;
  int status = 0;
};

struct Regulator {
  int branch = 0;  // index into NetworkModel::branches, must be a regulator branch
  int tap = 0;     // position -16..16
};

struct Battery {
  int bus = 0;
  double capacity_mwh = 0.0;
  double p_max_mw = 0.0;
  double soc = 0.5;
  double soc_min = 0.0;
  double soc_max = 1.0;
  double soc_init = 0.5;
};

struct DeviceFleet {
  std::vector<SmartInverter> inverters;
  std::vector<CapacitorBank> capacitors;
  std::vector<Regulator> regulators;
  std::vector<Battery> batteries;
};

// Grid-index/value maps. Indices are validated and throw std::invalid_argument
// when out of range.
double si_level_value(int level_index);   // 0..20  -> [-1, 1]
double bat_level_value(int level_index);  // 0..32  -> [-1, 1]
int tap_index_to_position(int tap_index); // 0..32  -> -16..16
int tap_position_to_index(int position);

// Q = a * sqrt(S^2 - P^2) with the headroom recomputed from the current
// active output. Throws when p_output exceeds the rating (profile error).
double si_reactive_power(const SmartInverter& si, int level_index);

// Shunt susceptance contribution for admittance assembly (p.u.).
double cb_injection(const CapacitorBank& cb, int status);

// Tap position -> p.u. voltage ratio, 1.0 + tap * 0.00625.
double regulator_setpoint(int tap_position);

struct BatteryStepResult {
  double p_mw = 0.0;    // discharge positive, charge negative
  double new_soc = 0.0;
};

// Dispatch `a * p_max` for `dt_hours`, curtailing the power so the state of
// charge lands exactly on a violated bound instead of crossing it.
BatteryStepResult battery_step(const Battery& bat, int level_index, double dt_hours);

}  // namespace voltgrid
