#include "eawsn/physics.hpp"

#include <cmath>
#include <string>

namespace eawsn::physics {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Relaxed checks for the pure formula evaluators: equality v_h == v_l_r is a
// legal zero-span discharge even though full simulations require strict
// ordering.
void check_discharge_inputs(double r_m, const ElectricalParams& p) {
    require(r_m > 0.0, "discharge: r_m must be > 0");
    require(p.c_stor > 0.0, "discharge: c_stor must be > 0");
    require(p.r_gpio >= 0.0, "discharge: r_gpio must be >= 0");
    require(p.v_l_r > 0.0 && p.v_h >= p.v_l_r, "discharge: need v_h >= v_l_r > 0");
    require(p.p_q >= 0.0 && p.p_geh >= 0.0, "discharge: powers must be >= 0");
}

double dv_dt(double v, double r_total, double net_power, double c) {
    return -(v * v / r_total - net_power) / (c * v);
}

double rk4_step(double v, double h, double r, double dp, double c) {
    const double k1 = dv_dt(v, r, dp, c);
    const double k2 = dv_dt(v + 0.5 * h * k1, r, dp, c);
    const double k3 = dv_dt(v + 0.5 * h * k2, r, dp, c);
    const double k4 = dv_dt(v + h * k3, r, dp, c);
    return v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// One trial step of size h: full step vs. two half steps, Richardson
// extrapolated. err is the classic |v2 - v1|/15 local estimate.
double try_step(double v, double h, double r, double dp, double c, double& err) {
    const double v1 = rk4_step(v, h, r, dp, c);
    const double vh = rk4_step(v, 0.5 * h, r, dp, c);
    const double v2 = rk4_step(vh, 0.5 * h, r, dp, c);
    err = std::abs(v2 - v1) / 15.0;
    return v2 + (v2 - v1) / 15.0;
}

} // namespace

void validate(const ElectricalParams& p) {
    require(p.c_stor > 0.0, "ElectricalParams: c_stor must be > 0");
    require(p.p_q >= 0.0, "ElectricalParams: p_q must be >= 0");
    require(p.p_geh >= 0.0, "ElectricalParams: p_geh must be >= 0");
    require(p.r_gpio >= 0.0, "ElectricalParams: r_gpio must be >= 0");
    require(p.v_l_min >= 0.0, "ElectricalParams: v_l_min must be >= 0");
    require(p.v_l_min < p.v_l_send && p.v_l_send <= p.v_l_r && p.v_l_r < p.v_h,
            "ElectricalParams: need v_l_min < v_l_send <= v_l_r < v_h");
}

double discharge_time_closed_form(double r_m, const ElectricalParams& p) {
    check_discharge_inputs(r_m, p);
    return (r_m + p.r_gpio) * p.c_stor * std::log(p.v_h / p.v_l_r);
}

DischargeResult discharge_time_constant_net_power(double r_m, const ElectricalParams& p) {
    check_discharge_inputs(r_m, p);
    const double r = r_m + p.r_gpio;
    const double dp = p.net_harvest_power();

    DischargeResult res;
    if (p.v_h == p.v_l_r) {
        res.t_m = 0.0;
        return res;
    }
    if (discharge_stalls(r, dp, p.v_l_r)) {
        res.t_m = std::numeric_limits<double>::infinity();
        res.terminated = DischargeTermination::kEquilibriumStall;
        return res;
    }
    if (dp == 0.0) {
        res.t_m = discharge_time_closed_form(r_m, p);
        return res;
    }
    const double num = p.v_h * p.v_h - r * dp;
    const double den = p.v_l_r * p.v_l_r - r * dp;
    res.t_m = 0.5 * r * p.c_stor * std::log(num / den);
    return res;
}

DischargeResult discharge_time_numeric(double r_m, const ElectricalParams& p,
                                       const IntegratorOptions& opt) {
    check_discharge_inputs(r_m, p);
    require(opt.rel_tol >= 1e-12 && opt.rel_tol <= 1e-3,
            "discharge_time_numeric: rel_tol outside [1e-12, 1e-3]");

    const double r = r_m + p.r_gpio;
    const double dp = p.net_harvest_power();
    const double c = p.c_stor;

    DischargeResult res;
    if (opt.record_trajectory) res.trajectory.push_back({0.0, p.v_h});
    if (p.v_h == p.v_l_r) {
        res.t_m = 0.0;
        return res;
    }
    // dV/dt >= 0 at the target threshold: the trajectory cannot cross it.
    if (discharge_stalls(r, dp, p.v_l_r)) {
        res.t_m = std::numeric_limits<double>::infinity();
        res.terminated = DischargeTermination::kEquilibriumStall;
        return res;
    }

    double t = 0.0;
    double v = p.v_h;
    double h = std::min(0.01 * r * c, opt.max_step);
    std::size_t steps = 0;

    while (v > p.v_l_r) {
        if (++steps > opt.max_steps)
            throw std::runtime_error("discharge_time_numeric: max step count exceeded");

        double err = 0.0;
        const double v_next = try_step(v, h, r, dp, c, err);
        const double tol = opt.rel_tol * std::max(std::abs(v_next), p.v_l_r);
        if (!std::isfinite(v_next) || err > tol) {
            h *= 0.5;
            continue;
        }

        if (v_next <= p.v_l_r) {
            // Crossing inside this step: bisect the substep length.
            double lo = 0.0, hi = h;
            for (int i = 0; i < 100 && (hi - lo) > 1e-16 * h; ++i) {
                const double mid = 0.5 * (lo + hi);
                double e2 = 0.0;
                if (try_step(v, mid, r, dp, c, e2) <= p.v_l_r) hi = mid;
                else lo = mid;
            }
            t += 0.5 * (lo + hi);
            if (opt.record_trajectory) res.trajectory.push_back({t, p.v_l_r});
            res.t_m = t;
            return res;
        }

        v = v_next;
        t += h;
        if (opt.record_trajectory) res.trajectory.push_back({t, v});

        // Pathological parameter guard; unreachable after the pre-check for
        // constant dP, but keeps the integrator honest.
        if (dv_dt(v, r, dp, c) >= 0.0) {
            res.t_m = std::numeric_limits<double>::infinity();
            res.terminated = DischargeTermination::kEquilibriumStall;
            return res;
        }

        if (err < tol * 0.03125) h *= 2.0;
        h = std::min(h, opt.max_step);
    }

    res.t_m = t;
    return res;
}

double charge_time(double e_act, const ElectricalParams& p) {
    require(e_act > 0.0, "charge_time: e_act must be > 0");
    const double dp = p.net_harvest_power();
    if (dp <= 0.0)
        throw NoNetHarvestError("charge_time: p_geh <= p_q, node never recharges");
    return e_act / dp;
}

double measurement_energy(const ElectricalParams& p) {
    require(p.c_stor > 0.0, "measurement_energy: c_stor must be > 0");
    require(p.v_h >= p.v_l_r && p.v_l_r >= 0.0, "measurement_energy: need v_h >= v_l_r >= 0");
    return 0.5 * p.c_stor * (p.v_h * p.v_h - p.v_l_r * p.v_l_r);
}

double min_storage_capacitance(double e_act_max, double v_h, double v_l_min) {
    require(e_act_max >= 0.0, "min_storage_capacitance: e_act_max must be >= 0");
    require(v_h > v_l_min && v_l_min > 0.0, "min_storage_capacitance: need v_h > v_l_min > 0");
    return 2.0 * e_act_max / (v_h * v_h - v_l_min * v_l_min);
}

ValidityRange validity_range(const ElectricalParams& p, double f_clk, double margin) {
    require(f_clk > 0.0, "validity_range: f_clk must be > 0");
    require(margin >= 1.0, "validity_range: margin must be >= 1");
    require(p.c_stor > 0.0 && p.v_l_r > 0.0 && p.v_h > p.v_l_r,
            "validity_range: need c_stor > 0 and v_h > v_l_r > 0");

    ValidityRange out;
    out.r_min = 2.0 / (f_clk * p.c_stor * std::log(p.v_h / p.v_l_r));
    const double dp = p.net_harvest_power();
    if (dp > 0.0) {
        out.r_max_hard = p.v_l_r * p.v_l_r / dp;
        out.r_max = out.r_max_hard / margin;
    } else {
        out.r_max_hard = std::numeric_limits<double>::infinity();
        out.r_max = std::numeric_limits<double>::infinity();
    }
    return out;
}

double condition_margin(double r_m, const ElectricalParams& p) {
    require(r_m > 0.0, "condition_margin: r_m must be > 0");
    const double load = p.v_l_r * p.v_l_r / r_m;
    const double imbalance = std::abs(p.net_harvest_power());
    if (imbalance == 0.0) return std::numeric_limits<double>::infinity();
    return load / imbalance;
}

} // namespace eawsn::physics
