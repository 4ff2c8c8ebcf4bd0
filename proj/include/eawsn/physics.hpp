#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace eawsn::physics {

/// Electrical constants of one node. All quantities in SI base units.
struct ElectricalParams {
    double c_stor   = 440e-6;  ///< storage capacitance [F]
    double v_h      = 3.15;    ///< upper threshold triggering an active phase [V]
    double v_l_r    = 2.85;    ///< lower threshold ending a measurement [V]
    double v_l_send = 2.0;     ///< voltage left after a beacon send [V]
    double v_l_min  = 1.8;     ///< minimum operating voltage [V]
    double p_q      = 2.5e-6;  ///< quiescent power draw [W]
    double p_geh    = 1e-3;    ///< harvested power [W]
    double r_gpio   = 0.0;     ///< series resistance of the GPIO switch path [ohm]

    double net_harvest_power() const { return p_geh - p_q; }
};

/// Rejects parameter sets that violate
///   v_l_min < v_l_send <= v_l_r < v_h,  c_stor > 0,
///   p_q >= 0, p_geh >= 0, r_gpio >= 0, v_l_min >= 0.
/// Throws std::invalid_argument.
void validate(const ElectricalParams& p);

/// Raised when p_geh <= p_q: the capacitor can never recharge.
struct NoNetHarvestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DischargeTermination {
    kThresholdCrossed,  ///< v_stor reached v_l_r after t_m seconds
    kEquilibriumStall,  ///< v_stor asymptotes to sqrt(R*dP) above v_l_r; t_m is +inf
};

struct VoltageSample {
    double t;  ///< seconds since discharge start
    double v;  ///< v_stor [V]
};

struct DischargeResult {
    double t_m = 0.0;
    DischargeTermination terminated = DischargeTermination::kThresholdCrossed;
    std::vector<VoltageSample> trajectory;  ///< filled only when requested

    bool stalled() const { return terminated == DischargeTermination::kEquilibriumStall; }
};

/// True iff a discharge through r_total never crosses v_l_r because the
/// harvested surplus holds the voltage at or above the threshold.
inline bool discharge_stalls(double r_total, double net_power, double v_l_r) {
    return net_power > 0.0 && v_l_r * v_l_r <= r_total * net_power;
}

/// t_m = (r_m + r_gpio) * c_stor * ln(v_h / v_l_r).
/// Pure RC discharge; ignores p_geh and p_q by construction.
/// v_h == v_l_r is allowed and yields 0.
double discharge_time_closed_form(double r_m, const ElectricalParams& p);

/// Exact crossing time of dV/dt = -(V^2/R - dP)/(c*V) with dP = p_geh - p_q
/// held constant:
///   t_m = (R*c/2) * ln((v_h^2 - R*dP) / (v_l_r^2 - R*dP)),  R = r_m + r_gpio.
/// Reduces exactly to the closed form when dP = 0. Reports kEquilibriumStall
/// when v_l_r^2 <= R*dP.
DischargeResult discharge_time_constant_net_power(double r_m, const ElectricalParams& p);

struct IntegratorOptions {
    double rel_tol = 1e-8;              ///< accepted range [1e-12, 1e-3]
    bool record_trajectory = false;
    double max_step = std::numeric_limits<double>::infinity();  ///< seconds
    std::size_t max_steps = 1'000'000;
};

/// Adaptive step-doubling RK4 integration of the same ODE, from v_h down to
/// v_l_r. Independent of the closed forms above; used as their oracle.
/// Throws std::runtime_error if max_steps is exceeded.
DischargeResult discharge_time_numeric(double r_m, const ElectricalParams& p,
                                       const IntegratorOptions& opt = {});

/// t_h = e_act / (p_geh - p_q). Throws NoNetHarvestError when p_geh <= p_q.
double charge_time(double e_act, const ElectricalParams& p);

/// E_m = c_stor * (v_h^2 - v_l_r^2) / 2, the fixed per-measurement cost.
double measurement_energy(const ElectricalParams& p);

/// Smallest storage capacitance that survives the worst active phase:
/// 2 * e_act_max / (v_h^2 - v_l_min^2).
double min_storage_capacitance(double e_act_max, double v_h, double v_l_min);

struct ValidityRange {
    double r_min;       ///< below this, quantization dominates (fewer than 2 counts)
    double r_max;       ///< r_max_hard / margin; recommended operating bound
    double r_max_hard;  ///< v_l_r^2 / (p_geh - p_q); discharge stalls at or past it
};

/// r_min = 2 / (f_clk * c_stor * ln(v_h / v_l_r)); r_max_hard per the
/// equilibrium bound. Both maxima are +inf when p_geh <= p_q.
ValidityRange validity_range(const ElectricalParams& p, double f_clk, double margin = 10.0);

/// (v_l_r^2 / r_m) / |p_geh - p_q|; +inf when p_geh == p_q. Values >= the
/// configured margin mean the linear count model holds at this resistance.
double condition_margin(double r_m, const ElectricalParams& p);

} // namespace eawsn::physics
