#include "voltgrid/devices.hpp"

#include <cmath>
#include <stdexcept>

namespace voltgrid {

namespace {

void check_index(int index, int count, const char* what) {
  if (index < 0 || index >= count)
    throw std::invalid_argument(std::string(what) + " index out of range");
}

}  // namespace

double si_level_value(int level_index) {
  check_index(level_index, kSiLevels, "smart inverter level");
  return -1.0 + 0.1 * level_index;
}

double bat_level_value(int level_index) {
  check_index(level_index, kBatLevels, "battery level");
  return (level_index - kBatNeutralLevel) * kBatStep;
}

int tap_index_to_position(int tap_index) {
  check_index(tap_index, kTapLevels, "tap");
  return tap_index - kTapNeutralLevel;
}

int tap_position_to_index(int position) {
  if (position < -16 || position > 16)
    throw std::invalid_argument("tap position out of range [-16, 16]");
  return position + kTapNeutralLevel;
}

double si_reactive_power(const SmartInverter& si, int level_index) {
  const double a = si_level_value(level_index);
  if (si.p_output_mw > si.s_rating_mva)
    throw std::invalid_argument("inverter active output exceeds apparent-power rating");
  const double head2 = si.s_rating_mva * si.s_rating_mva - si.p_output_mw * si.p_output_mw;
  const double q_max = std::sqrt(std::max(0.0, head2));
  return a * q_max;
}

double cb_injection(const CapacitorBank& cb, int status) {
  check_index(status, kCbLevels, "capacitor status");
  return status ? cb.susceptance_pu : 0.0;
}

double regulator_setpoint(int tap_position) {
  if (tap_position < -16 || tap_position > 16)
    throw std::invalid_argument("tap position out of range [-16, 16]");
  return 1.0 + tap_position * kTapStepPu;
}

BatteryStepResult battery_step(const Battery& bat, int level_index, double dt_hours) {
  if (dt_hours <= 0.0) throw std::invalid_argument("battery step requires dt > 0");
  const double a = bat_level_value(level_index);

  // Discharging lowers the state of charge, charging (a < 0) raises it.
  double p = a * bat.p_max_mw;
  double soc_next = bat.soc - p * dt_hours / bat.capacity_mwh;
  if (soc_next > bat.soc_max) {
    p = -(bat.soc_max - bat.soc) * bat.capacity_mwh / dt_hours;
    soc_next = bat.soc_max;
  } else if (soc_next < bat.soc_min) {
    p = (bat.soc - bat.soc_min) * bat.capacity_mwh / dt_hours;
    soc_next = bat.soc_min;
  }
  return {p, soc_next};
}

}  // namespace voltgrid
