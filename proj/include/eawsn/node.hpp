#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "eawsn/physics.hpp"
#include "eawsn/rng.hpp"
#include "eawsn/wire.hpp"

namespace eawsn::node {

enum class Phase { kHarvest, kMeasure, kSend };
enum class ActivePhase { kMeasure, kSend };

/// Which solver produces a measurement's discharge time.
///   kConstantNetPower — exact constant-dP solution; harvest continues during
///                       the measurement (default).
///   kNumeric          — adaptive ODE integration of the same dynamics.
///   kClosedForm       — pure RC model; net harvest ignored during the
///                       measurement (the linear TDDC approximation).
enum class MeasureSolver { kConstantNetPower, kNumeric, kClosedForm };

/// Send energy that leaves the capacitor at electrical.v_l_send.
double default_send_energy(const physics::ElectricalParams& p);

struct NodeParams {
    physics::ElectricalParams electrical{};
    std::uint16_t node_id = 1;
    double f_clk_nominal = 37e3;   ///< [Hz]
    double f_clk_error = 0.0;      ///< signed ratio; actual = nominal * (1 + error)
    double e_act_send = default_send_energy(physics::ElectricalParams{});  ///< [J] per beacon
    double t_send = 1e-3;          ///< beacon transmission duration [s]
    bool pvd_grid_enabled = false;
    double pvd_grid_step = 0.2;    ///< [V]
    double pvd_grid_lo = 2.0;      ///< [V]
    double pvd_grid_hi = 3.2;      ///< [V]
    std::vector<ActivePhase> schedule{ActivePhase::kMeasure, ActivePhase::kSend};
    MeasureSolver measure_solver = MeasureSolver::kConstantNetPower;
    bool count_jitter_enabled = false;  ///< +/-1-count start-phase jitter
    int counter_bits = 32;

    double f_clk_actual() const { return f_clk_nominal * (1.0 + f_clk_error); }
};

/// Throws std::invalid_argument on any violated invariant, including
/// e_act_send > c_stor*(v_h^2 - v_l_min^2)/2 (node would not survive a send).
void validate(const NodeParams& params);

/// Nearest grid point v_lo + k*step, clamped to [v_lo, v_hi].
double snap_to_pvd_grid(double v, double step, double v_lo, double v_hi);

/// Electrical params with v_h, v_l_r, v_l_send snapped to the PVD grid when
/// pvd_grid_enabled; verbatim otherwise.
physics::ElectricalParams effective_electrical(const NodeParams& params);

struct TraceSample {
    double t;       ///< [s]
    double v_stor;  ///< [V]
    double v_r;     ///< [V]; equals v_stor during measure phases, 0 otherwise
    Phase phase;
};

enum class EventKind { kVhCrossed, kVlrCrossed, kBeaconEmitted, kStall, kNoNetHarvest };
const char* to_string(EventKind k);
const char* to_string(Phase p);

struct TraceEvent {
    double t;
    EventKind kind;
    std::string detail;
};

struct SimTrace {
    std::vector<TraceSample> samples;
    std::vector<TraceEvent> events;

    /// CSV with header t_s,v_stor_V,v_r_V,phase.
    void write_samples_csv(std::ostream& os) const;
    /// CSV with header t_s,kind,detail.
    void write_events_csv(std::ostream& os) const;
};

struct Counters {
    std::uint32_t n_m = 0;
    std::uint32_t n_h = 0;
    std::uint8_t seq = 0;
};

struct QuantizedCount {
    std::uint32_t count = 0;
    bool clipped = false;
};

/// floor(t * f_clk_actual), saturating at 2^counter_bits - 1 with the clipped
/// flag set. The timer counts completed periods.
QuantizedCount quantize_count(double t, double f_clk_actual, int counter_bits = 32);

/// Same with a start-phase offset u in [0, 1) clock periods:
/// floor(t * f + u). u models the unknown counter alignment.
QuantizedCount quantize_count_with_phase(double t, double f_clk_actual, double u,
                                         int counter_bits = 32);

struct MeasurementResult {
    QuantizedCount n_m{};
    double t_m = 0.0;     ///< [s]; +inf when stalled
    bool stalled = false;
    SimTrace fragment;    ///< discharge trace starting at t = 0
};

/// One measurement starting at v_h. rng is only consulted when
/// count_jitter_enabled.
MeasurementResult run_measurement(const NodeParams& params, double r_m, Rng* rng = nullptr);

struct HarvestResult {
    QuantizedCount n_h{};
    double t_h = 0.0;   ///< [s]
    SimTrace fragment;  ///< charge trace starting at t = 0, ending at v_h
};

/// Recharges e_deficit joules up to v_h. Throws physics::NoNetHarvestError
/// when p_geh <= p_q (and e_deficit > 0).
HarvestResult run_harvest(const NodeParams& params, double e_deficit, Rng* rng = nullptr);

struct CycleRunResult {
    SimTrace trace;
    std::vector<wire::Beacon> beacons;
    bool completed = false;  ///< false when a stall or no-net-harvest ended the run
};

/// Alternates harvest and scheduled active phases for n_cycles passes over
/// the schedule. Starts from the post-send voltage. Each send emits a beacon
/// carrying the latest (n_m, n_h, seq). Deterministic for a fixed seed; the
/// seed only feeds enabled noise sources.
CycleRunResult run_cycles(const NodeParams& params, double r_m, int n_cycles,
                          std::uint64_t seed);

} // namespace eawsn::node
