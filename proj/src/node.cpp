#include "eawsn/node.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "eawsn/csv.hpp"

namespace eawsn::node {

namespace {

constexpr int kSamplesPerPhase = 32;
constexpr int kSamplesPerSend = 8;

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Voltage during a constant-net-power discharge through r_total, starting
// from v0. dp = 0 gives the plain RC exponential.
double discharge_voltage(double v0, double tau, double r_total, double dp, double c) {
    const double floor_sq = r_total * dp;
    const double u = floor_sq + (v0 * v0 - floor_sq) * std::exp(-2.0 * tau / (r_total * c));
    return std::sqrt(std::max(u, 0.0));
}

double post_send_voltage(const physics::ElectricalParams& e, double e_act_send) {
    return std::sqrt(e.v_h * e.v_h - 2.0 * e_act_send / e.c_stor);
}

void merge_fragment(SimTrace& dst, const SimTrace& frag, double t0) {
    for (const auto& s : frag.samples)
        if (s.t > 0.0) dst.samples.push_back({t0 + s.t, s.v_stor, s.v_r, s.phase});
    for (const auto& ev : frag.events)
        dst.events.push_back({t0 + ev.t, ev.kind, ev.detail});
}

} // namespace

double default_send_energy(const physics::ElectricalParams& p) {
    return 0.5 * p.c_stor * (p.v_h * p.v_h - p.v_l_send * p.v_l_send);
}

void validate(const NodeParams& params) {
    physics::validate(params.electrical);
    require(params.f_clk_nominal > 0.0, "NodeParams: f_clk_nominal must be > 0");
    require(std::abs(params.f_clk_error) < 0.2, "NodeParams: |f_clk_error| must be < 0.2");
    const auto& e = params.electrical;
    const double e_surv = 0.5 * e.c_stor * (e.v_h * e.v_h - e.v_l_min * e.v_l_min);
    require(params.e_act_send > 0.0 && params.e_act_send <= e_surv,
            "NodeParams: e_act_send must be in (0, c_stor*(v_h^2 - v_l_min^2)/2]");
    require(params.t_send > 0.0, "NodeParams: t_send must be > 0");
    require(params.pvd_grid_step > 0.0 && params.pvd_grid_lo < params.pvd_grid_hi,
            "NodeParams: PVD grid needs step > 0 and v_lo < v_hi");
    require(!params.schedule.empty(), "NodeParams: schedule must not be empty");
    require(params.counter_bits >= 1 && params.counter_bits <= 32,
            "NodeParams: counter_bits must be in [1, 32]");
}

double snap_to_pvd_grid(double v, double step, double v_lo, double v_hi) {
    require(step > 0.0, "snap_to_pvd_grid: step must be > 0");
    require(v_lo < v_hi, "snap_to_pvd_grid: need v_lo < v_hi");
    const double k_max = std::floor((v_hi - v_lo) / step + 1e-9);
    const double k = std::clamp(std::round((v - v_lo) / step), 0.0, k_max);
    return std::min(v_lo + k * step, v_hi);
}

physics::ElectricalParams effective_electrical(const NodeParams& params) {
    physics::ElectricalParams e = params.electrical;
    if (params.pvd_grid_enabled) {
        const double step = params.pvd_grid_step;
        const double lo = params.pvd_grid_lo;
        const double hi = params.pvd_grid_hi;
        e.v_h = snap_to_pvd_grid(e.v_h, step, lo, hi);
        e.v_l_r = snap_to_pvd_grid(e.v_l_r, step, lo, hi);
        e.v_l_send = snap_to_pvd_grid(e.v_l_send, step, lo, hi);
        physics::validate(e);  // snapping must not break the threshold order
    }
    return e;
}

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::kVhCrossed: return "vh-crossed";
        case EventKind::kVlrCrossed: return "vlr-crossed";
        case EventKind::kBeaconEmitted: return "beacon-emitted";
        case EventKind::kStall: return "stall";
        case EventKind::kNoNetHarvest: return "no-net-harvest";
    }
    return "?";
}

const char* to_string(Phase p) {
    switch (p) {
        case Phase::kHarvest: return "harvest";
        case Phase::kMeasure: return "measure";
        case Phase::kSend: return "send";
    }
    return "?";
}

void SimTrace::write_samples_csv(std::ostream& os) const {
    os << "t_s,v_stor_V,v_r_V,phase\n";
    for (const auto& s : samples) {
        os << format_double(s.t) << ',' << format_double(s.v_stor) << ','
           << format_double(s.v_r) << ',' << to_string(s.phase) << '\n';
    }
}

void SimTrace::write_events_csv(std::ostream& os) const {
    os << "t_s,kind,detail\n";
    for (const auto& ev : events)
        os << format_double(ev.t) << ',' << to_string(ev.kind) << ',' << ev.detail << '\n';
}

QuantizedCount quantize_count(double t, double f_clk_actual, int counter_bits) {
    return quantize_count_with_phase(t, f_clk_actual, 0.0, counter_bits);
}

QuantizedCount quantize_count_with_phase(double t, double f_clk_actual, double u,
                                         int counter_bits) {
    require(t >= 0.0, "quantize_count: t must be >= 0");
    require(f_clk_actual > 0.0, "quantize_count: f_clk must be > 0");
    require(u >= 0.0 && u < 1.0, "quantize_count: phase offset must be in [0, 1)");
    require(counter_bits >= 1 && counter_bits <= 32, "quantize_count: counter_bits in [1, 32]");

    const double limit = counter_bits == 32 ? 4294967295.0
                                            : static_cast<double>((1u << counter_bits) - 1u);
    double raw = t * f_clk_actual + u;
    // Products that land exactly on a period boundary in real arithmetic can
    // fall a few ulps short of it here; resolve those to the boundary count.
    const double nearest = std::round(raw);
    if (nearest > 0.0 &&
        std::abs(raw - nearest) <= 32.0 * std::numeric_limits<double>::epsilon() * nearest)
        raw = nearest;
    else
        raw = std::floor(raw);
    if (!(raw <= limit))  // also catches +inf
        return {static_cast<std::uint32_t>(limit), true};
    return {static_cast<std::uint32_t>(raw), false};
}

MeasurementResult run_measurement(const NodeParams& params, double r_m, Rng* rng) {
    validate(params);
    require(r_m > 0.0, "run_measurement: r_m must be > 0");
    const auto elec = effective_electrical(params);
    const double r = r_m + elec.r_gpio;
    const double c = elec.c_stor;

    MeasurementResult out;
    out.fragment.samples.push_back({0.0, elec.v_h, elec.v_h, Phase::kMeasure});

    physics::DischargeResult d;
    double dp_profile = elec.net_harvest_power();
    switch (params.measure_solver) {
        case MeasureSolver::kClosedForm:
            d.t_m = physics::discharge_time_closed_form(r_m, elec);
            dp_profile = 0.0;
            break;
        case MeasureSolver::kConstantNetPower:
            d = physics::discharge_time_constant_net_power(r_m, elec);
            break;
        case MeasureSolver::kNumeric: {
            physics::IntegratorOptions opt;
            opt.record_trajectory = true;
            d = physics::discharge_time_numeric(r_m, elec, opt);
            break;
        }
    }

    if (d.stalled()) {
        out.stalled = true;
        out.t_m = d.t_m;
        out.fragment.events.push_back(
            {0.0, EventKind::kStall, "equilibrium stall: v_l_r^2 <= (r_m+r_gpio)*(p_geh-p_q)"});
        return out;
    }

    out.t_m = d.t_m;
    const double u = (params.count_jitter_enabled && rng) ? rng->uniform01() : 0.0;
    out.n_m = quantize_count_with_phase(out.t_m, params.f_clk_actual(), u, params.counter_bits);

    if (!d.trajectory.empty()) {
        const std::size_t stride = std::max<std::size_t>(1, d.trajectory.size() / 64);
        for (std::size_t i = stride; i < d.trajectory.size(); i += stride) {
            const auto& smp = d.trajectory[i];
            out.fragment.samples.push_back({smp.t, smp.v, smp.v, Phase::kMeasure});
        }
        if (out.fragment.samples.back().t < out.t_m)
            out.fragment.samples.push_back({out.t_m, elec.v_l_r, elec.v_l_r, Phase::kMeasure});
    } else {
        for (int j = 1; j <= kSamplesPerPhase; ++j) {
            const double tau = out.t_m * j / kSamplesPerPhase;
            const double v = j == kSamplesPerPhase
                                 ? elec.v_l_r
                                 : discharge_voltage(elec.v_h, tau, r, dp_profile, c);
            out.fragment.samples.push_back({tau, v, v, Phase::kMeasure});
        }
    }
    out.fragment.events.push_back({out.t_m, EventKind::kVlrCrossed, ""});
    return out;
}

HarvestResult run_harvest(const NodeParams& params, double e_deficit, Rng* rng) {
    validate(params);
    require(e_deficit >= 0.0, "run_harvest: e_deficit must be >= 0");
    const auto elec = effective_electrical(params);
    const double c = elec.c_stor;
    require(e_deficit <= 0.5 * c * elec.v_h * elec.v_h,
            "run_harvest: e_deficit exceeds storable energy");

    HarvestResult out;
    const double v0 = std::sqrt(elec.v_h * elec.v_h - 2.0 * e_deficit / c);
    out.fragment.samples.push_back({0.0, v0, 0.0, Phase::kHarvest});

    if (e_deficit > 0.0) {
        out.t_h = physics::charge_time(e_deficit, elec);  // throws NoNetHarvestError
        const double dp = elec.net_harvest_power();
        for (int j = 1; j <= kSamplesPerPhase; ++j) {
            const double tau = out.t_h * j / kSamplesPerPhase;
            const double v = j == kSamplesPerPhase
                                 ? elec.v_h
                                 : std::sqrt(v0 * v0 + 2.0 * dp * tau / c);
            out.fragment.samples.push_back({tau, v, 0.0, Phase::kHarvest});
        }
    }

    const double u = (params.count_jitter_enabled && rng) ? rng->uniform01() : 0.0;
    out.n_h = quantize_count_with_phase(out.t_h, params.f_clk_actual(), u, params.counter_bits);
    out.fragment.events.push_back({out.t_h, EventKind::kVhCrossed, ""});
    return out;
}

CycleRunResult run_cycles(const NodeParams& params, double r_m, int n_cycles,
                          std::uint64_t seed) {
    validate(params);
    require(r_m > 0.0, "run_cycles: r_m must be > 0");
    require(n_cycles >= 1, "run_cycles: n_cycles must be >= 1");

    const auto elec = effective_electrical(params);
    const double c = elec.c_stor;
    Rng rng(Rng::mix(seed, 0));

    CycleRunResult out;
    SimTrace& tr = out.trace;

    double t = 0.0;
    double v = post_send_voltage(elec, params.e_act_send);
    tr.samples.push_back({0.0, v, 0.0, Phase::kHarvest});

    Counters ctr;
    bool have_nm = false;
    bool nm_clipped = false, nh_clipped = false;

    for (int cycle = 0; cycle < n_cycles; ++cycle) {
        for (ActivePhase kind : params.schedule) {
            // Recharge to v_h before every active phase.
            const double deficit = 0.5 * c * (elec.v_h * elec.v_h - v * v);
            if (elec.net_harvest_power() <= 0.0) {
                tr.events.push_back({t, EventKind::kNoNetHarvest, "p_geh <= p_q"});
                return out;
            }
            HarvestResult h = run_harvest(params, deficit, &rng);
            merge_fragment(tr, h.fragment, t);
            t += h.t_h;
            v = elec.v_h;
            ctr.n_h = h.n_h.count;
            nh_clipped = h.n_h.clipped;

            if (kind == ActivePhase::kMeasure) {
                MeasurementResult m = run_measurement(params, r_m, &rng);
                merge_fragment(tr, m.fragment, t);
                if (m.stalled) return out;
                t += m.t_m;
                v = elec.v_l_r;
                ctr.n_m = m.n_m.count;
                nm_clipped = m.n_m.clipped;
                have_nm = true;
            } else {
                const double v_end = std::sqrt(v * v - 2.0 * params.e_act_send / c);
                for (int j = 1; j <= kSamplesPerSend; ++j) {
                    const double tau = params.t_send * j / kSamplesPerSend;
                    const double vs =
                        j == kSamplesPerSend
                            ? v_end
                            : std::sqrt(v * v - (2.0 * params.e_act_send / c) *
                                                    (tau / params.t_send));
                    tr.samples.push_back({t + tau, vs, 0.0, Phase::kSend});
                }
                t += params.t_send;
                v = v_end;

                wire::Beacon b;
                b.version = 1;
                b.node_id = params.node_id;
                b.seq = ctr.seq;
                b.n_m = have_nm ? ctr.n_m : 0;
                b.n_h = ctr.n_h;
                b.flags = static_cast<std::uint8_t>(
                    (have_nm ? wire::kFlagNmValid : 0) |
                    (((have_nm && nm_clipped) || nh_clipped) ? wire::kFlagCounterClipped : 0));
                out.beacons.push_back(b);
                tr.events.push_back({t, EventKind::kBeaconEmitted,
                                     "seq=" + std::to_string(ctr.seq) +
                                         " n_m=" + std::to_string(b.n_m) +
                                         " n_h=" + std::to_string(b.n_h)});
                ++ctr.seq;  // wraps at 256
            }
        }
    }
    out.completed = true;
    return out;
}

} // namespace eawsn::node
