#include "voltgrid/env.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace voltgrid {

std::vector<std::uint8_t> StateLayout::voltage_mask() const {
  std::vector<std::uint8_t> mask(size(), 0);
  for (int i = 0; i < n_bus; ++i) mask[i] = 1;
  return mask;
}

int count_band_violations(const Eigen::VectorXd& v_mag, double lo, double hi) {
  int count = 0;
  for (int i = 0; i < v_mag.size(); ++i)
    if (v_mag(i) < lo || v_mag(i) > hi) ++count;
  return count;
}

RewardBreakdown compute_reward(const RewardParams& rp, const Eigen::VectorXd& v_mag,
                               double p_loss_mw, double p_load_mw, const DeviceDelta& delta) {
  RewardBreakdown rb;
  const double band = (rp.band_hi - rp.band_lo) / 2.0;
  for (int i = 0; i < v_mag.size(); ++i) {
    const double excess = std::max(0.0, std::abs(v_mag(i) - 1.0) - band);
    rb.f_volt += rp.c_v * excess * excess;
  }
  rb.f_ctrl = rp.c_sw * (delta.cb_toggles + delta.tap_steps) +
              rp.c_si * delta.si_effort + rp.c_bat * delta.bat_effort;
  rb.f_power = p_load_mw > 1e-9 ? rp.c_p * p_loss_mw / p_load_mw : 0.0;
  rb.total = -(rb.f_volt + rb.f_ctrl + rb.f_power);
  return rb;
}

VoltVarEnv::VoltVarEnv(std::shared_ptr<const EnvSpec> spec) : spec_(std::move(spec)) {
  const EnvSpec& s = *spec_;
  s.network.validate();
  layout_.n_bus = static_cast<int>(s.network.buses.size());
  layout_.n_bat = static_cast<int>(s.fleet.batteries.size());
  layout_.n_reg = static_cast<int>(s.fleet.regulators.size());
  layout_.n_cb = static_cast<int>(s.fleet.capacitors.size());
  layout_.n_si = static_cast<int>(s.fleet.inverters.size());

  // The fleet must line up with the network's regulator branches and
  // capacitor buses, in the same (ascending) order, so that action vectors
  // map one-to-one onto admittance-assembly inputs.
  const auto reg_branches = s.network.regulator_branches();
  if (reg_branches.size() != s.fleet.regulators.size())
    throw std::invalid_argument("regulator count does not match regulator branches");
  for (std::size_t i = 0; i < reg_branches.size(); ++i)
    if (s.fleet.regulators[i].branch != reg_branches[i])
      throw std::invalid_argument("regulator order must follow ascending branch index");
  const auto cap_buses = s.network.capacitor_buses();
  if (cap_buses.size() != s.fleet.capacitors.size())
    throw std::invalid_argument("capacitor count does not match capacitor buses");
  for (std::size_t i = 0; i < cap_buses.size(); ++i)
    if (s.fleet.capacitors[i].bus != cap_buses[i])
      throw std::invalid_argument("capacitor order must follow ascending bus id");
  for (const SmartInverter& si : s.fleet.inverters)
    if (si.p_rating_mw > si.s_rating_mva)
      throw std::invalid_argument("inverter active rating exceeds apparent rating");

  fleet_ = s.fleet;
}

std::vector<int> VoltVarEnv::head_sizes() const {
  std::vector<int> sizes;
  sizes.insert(sizes.end(), layout_.n_si, kSiLevels);
  sizes.insert(sizes.end(), layout_.n_cb, kCbLevels);
  sizes.insert(sizes.end(), layout_.n_reg, kTapLevels);
  sizes.insert(sizes.end(), layout_.n_bat, kBatLevels);
  return sizes;
}

std::vector<int> VoltVarEnv::neutral_heads() const {
  std::vector<int> heads;
  heads.insert(heads.end(), layout_.n_si, kSiNeutralLevel);
  heads.insert(heads.end(), layout_.n_cb, 0);
  heads.insert(heads.end(), layout_.n_reg, kTapNeutralLevel);
  heads.insert(heads.end(), layout_.n_bat, kBatNeutralLevel);
  return heads;
}

ActionVector VoltVarEnv::action_from_heads(std::span<const int> heads) const {
  if (static_cast<int>(heads.size()) !=
      layout_.n_si + layout_.n_cb + layout_.n_reg + layout_.n_bat)
    throw std::invalid_argument("head count mismatch");
  ActionVector a;
  auto it = heads.begin();
  a.si_levels.assign(it, it + layout_.n_si);
  it += layout_.n_si;
  a.cb_statuses.assign(it, it + layout_.n_cb);
  it += layout_.n_cb;
  a.taps.assign(it, it + layout_.n_reg);
  it += layout_.n_reg;
  a.bat_levels.assign(it, it + layout_.n_bat);
  return a;
}

std::vector<int> VoltVarEnv::heads_from_action(const ActionVector& a) const {
  std::vector<int> heads;
  heads.insert(heads.end(), a.si_levels.begin(), a.si_levels.end());
  heads.insert(heads.end(), a.cb_statuses.begin(), a.cb_statuses.end());
  heads.insert(heads.end(), a.taps.begin(), a.taps.end());
  heads.insert(heads.end(), a.bat_levels.begin(), a.bat_levels.end());
  return heads;
}

void VoltVarEnv::validate_action(const ActionVector& a) const {
  auto check = [](const std::vector<int>& v, std::size_t n, int levels, const char* what) {
    if (v.size() != n) throw std::invalid_argument(std::string(what) + " action count mismatch");
    for (int idx : v)
      if (idx < 0 || idx >= levels)
        throw std::invalid_argument(std::string(what) + " action index out of range");
  };
  check(a.si_levels, fleet_.inverters.size(), kSiLevels, "inverter");
  check(a.cb_statuses, fleet_.capacitors.size(), kCbLevels, "capacitor");
  check(a.taps, fleet_.regulators.size(), kTapLevels, "regulator");
  check(a.bat_levels, fleet_.batteries.size(), kBatLevels, "battery");
}

Injections VoltVarEnv::current_injections(int t) const {
  const NetworkModel& net = spec_->network;
  const LoadProfile& prof = spec_->profiles.at(profile_);
  Injections inj;
  inj.p_mw.assign(net.buses.size(), 0.0);
  inj.q_mvar.assign(net.buses.size(), 0.0);
  const double ls = prof.load_scale.at(t) * scale_;
  for (const Bus& b : net.buses) {
    inj.p_mw[b.id] -= b.load_p_mw * ls;
    inj.q_mvar[b.id] -= b.load_q_mvar * ls;
  }
  for (const SmartInverter& si : fleet_.inverters) {
    inj.p_mw[si.bus] += si.p_output_mw;
    inj.q_mvar[si.bus] += si.q_output_mvar;
  }
  return inj;
}

StateVector VoltVarEnv::assemble_state() const {
  StateVector s(layout_.size());
  for (int i = 0; i < layout_.n_bus; ++i) s(i) = solution_.v_mag(i);
  int k = layout_.soc_begin();
  for (const Battery& b : fleet_.batteries) s(k++) = b.soc;
  k = layout_.tap_begin();
  for (const Regulator& r : fleet_.regulators) s(k++) = r.tap / 16.0;
  k = layout_.cb_begin();
  for (const CapacitorBank& c : fleet_.capacitors) s(k++) = static_cast<double>(c.status);
  k = layout_.si_begin();
  for (const SmartInverter& si : fleet_.inverters) s(k++) = si_level_value(si.level);
  return s;
}

StateVector VoltVarEnv::reset(const EpisodeConfig& cfg) {
  if (cfg.horizon != 24) throw std::invalid_argument("horizon must be 24");
  if (cfg.profile_id < 0 || cfg.profile_id >= static_cast<int>(spec_->profiles.size()))
    throw std::invalid_argument("profile id out of range");
  const LoadProfile& prof = spec_->profiles[cfg.profile_id];
  if (prof.load_scale.size() != 24 || prof.pv_scale.size() != 24)
    throw std::invalid_argument("profile must have 24 entries");

  std::mt19937_64 rng(cfg.seed);
  scale_ = std::uniform_real_distribution<double>(cfg.scale_min, cfg.scale_max)(rng);
  profile_ = cfg.profile_id;
  horizon_ = cfg.horizon;
  t_ = 0;

  fleet_ = spec_->fleet;
  for (SmartInverter& si : fleet_.inverters) {
    si.level = kSiNeutralLevel;
    si.p_output_mw = prof.pv_scale[0] * si.p_rating_mw * scale_;
    si.q_output_mvar = 0.0;
  }
  for (CapacitorBank& c : fleet_.capacitors) c.status = 0;
  for (Regulator& r : fleet_.regulators) r.tap = 0;
  for (Battery& b : fleet_.batteries) b.soc = b.soc_init;

  std::vector<double> taps(fleet_.regulators.size(), 1.0);
  std::vector<std::uint8_t> cb(fleet_.capacitors.size(), 0);
  solution_ = solve_power_flow(spec_->network, current_injections(0), taps, cb);
  if (!solution_.converged)
    throw std::invalid_argument("power flow diverged at reset; configuration rejected");

  active_ = true;
  return assemble_state();
}

VoltVarEnv::StepResult VoltVarEnv::step(const ActionVector& action) {
  if (!active_) throw std::logic_error("step called on inactive episode");
  validate_action(action);

  const LoadProfile& prof = spec_->profiles[profile_];
  DeviceDelta delta;

  // Inverters: new reactive setpoint at this hour's active output.
  for (std::size_t i = 0; i < fleet_.inverters.size(); ++i) {
    SmartInverter& si = fleet_.inverters[i];
    si.p_output_mw = prof.pv_scale[t_] * si.p_rating_mw * scale_;
    const double q_prev = si.q_output_mvar;
    const double q_new = si_reactive_power(si, action.si_levels[i]);
    const double head2 = si.s_rating_mva * si.s_rating_mva - si.p_output_mw * si.p_output_mw;
    const double q_max = std::sqrt(std::max(0.0, head2));
    if (q_max > 1e-9) delta.si_effort += std::abs(q_new - q_prev) / q_max;
    si.q_output_mvar = q_new;
    si.level = action.si_levels[i];
  }

  // Batteries: dispatch with SoC curtailment, one-hour steps.
  std::vector<double> bat_power(fleet_.batteries.size(), 0.0);
  for (std::size_t i = 0; i < fleet_.batteries.size(); ++i) {
    Battery& b = fleet_.batteries[i];
    const BatteryStepResult r = battery_step(b, action.bat_levels[i], 1.0);
    b.soc = r.new_soc;
    bat_power[i] = r.p_mw;
    if (b.p_max_mw > 0.0) delta.bat_effort += std::abs(r.p_mw) / b.p_max_mw;
  }

  // Regulators and capacitors: discrete switching.
  std::vector<double> taps(fleet_.regulators.size(), 1.0);
  for (std::size_t i = 0; i < fleet_.regulators.size(); ++i) {
    Regulator& r = fleet_.regulators[i];
    const int pos = tap_index_to_position(action.taps[i]);
    delta.tap_steps += std::abs(pos - r.tap);
    r.tap = pos;
    taps[i] = regulator_setpoint(pos);
  }
  std::vector<std::uint8_t> cb(fleet_.capacitors.size(), 0);
  for (std::size_t i = 0; i < fleet_.capacitors.size(); ++i) {
    CapacitorBank& c = fleet_.capacitors[i];
    if (c.status != action.cb_statuses[i]) ++delta.cb_toggles;
    c.status = action.cb_statuses[i];
    cb[i] = static_cast<std::uint8_t>(c.status);
  }

  Injections inj = current_injections(t_);
  for (std::size_t i = 0; i < fleet_.batteries.size(); ++i)
    inj.p_mw[fleet_.batteries[i].bus] += bat_power[i];

  StepResult out;
  const PowerFlowSolution trial = solve_power_flow(spec_->network, inj, taps, cb);

  if (!trial.converged) {
    // Voltage collapse: heavy penalty, terminate, observation unchanged.
    out.reward.f_volt = spec_->reward.r_div;
    out.reward.total = -spec_->reward.r_div;
    out.done = true;
    out.info.converged = false;
    out.info.p_loss_mw = 0.0;
    out.info.violations = 0;
    out.state = assemble_state();
    active_ = false;
    return out;
  }

  solution_ = trial;
  const double p_load = spec_->network.total_load_mw() * prof.load_scale[t_] * scale_;
  out.reward = compute_reward(spec_->reward, solution_.v_mag, solution_.p_loss_mw, p_load, delta);
  out.info.converged = true;
  out.info.p_loss_mw = solution_.p_loss_mw;
  out.info.violations =
      count_band_violations(solution_.v_mag, spec_->reward.band_lo, spec_->reward.band_hi);

  ++t_;
  out.done = t_ >= horizon_;
  if (out.done) active_ = false;
  out.state = assemble_state();
  return out;
}

DecodedState decode_state(const StateLayout& layout, const StateVector& s) {
  if (s.size() != layout.size()) throw std::invalid_argument("state length mismatch");
  DecodedState d;
  d.v_mag = s.segment(layout.voltage_begin(), layout.n_bus);
  d.soc = s.segment(layout.soc_begin(), layout.n_bat);
  d.tap_norm = s.segment(layout.tap_begin(), layout.n_reg);
  d.cb_status = s.segment(layout.cb_begin(), layout.n_cb);
  d.si_norm = s.segment(layout.si_begin(), layout.n_si);
  return d;
}

StateVector encode_state(const StateLayout& layout, const DecodedState& d) {
  StateVector s(layout.size());
  s.segment(layout.voltage_begin(), layout.n_bus) = d.v_mag;
  s.segment(layout.soc_begin(), layout.n_bat) = d.soc;
  s.segment(layout.tap_begin(), layout.n_reg) = d.tap_norm;
  s.segment(layout.cb_begin(), layout.n_cb) = d.cb_status;
  s.segment(layout.si_begin(), layout.n_si) = d.si_norm;
  return s;
}

}  // namespace voltgrid
