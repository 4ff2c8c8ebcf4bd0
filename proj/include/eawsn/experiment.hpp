#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "eawsn/config.hpp"

namespace eawsn::cli {

struct SweepRow {
    double r_true = 0.0;
    std::optional<std::uint32_t> n_m;     // empty on stall
    std::optional<double> r_est_model;
    std::optional<double> r_est_calibrated;
    bool stall = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::optional<station::CalibrationModel> calibration;  // used for the calibrated column
};

/// One measurement per sweep resistance at fixed parameters. The calibrated
/// column uses external_cal when given, otherwise a proportional fit to the
/// sweep's own (r, n_m) points.
SweepResult run_sweep(const ExperimentConfig& cfg,
                      const station::CalibrationModel* external_cal = nullptr);

/// Header r_true_ohm,n_m,r_est_model_ohm,r_est_calibrated_ohm,stall.
void write_sweep_csv(std::ostream& os, const SweepResult& result);

struct MonteCarloSummary {
    std::vector<double> slope_samples;  ///< fitted pulses/ohm, one per trial
    double slope_min = 0.0;
    double slope_max = 0.0;
    double slope_mean = 0.0;

    struct ErrorQuantiles {
        double r = 0.0;  ///< [ohm]
        double min = 0.0, p05 = 0.0, p50 = 0.0, p95 = 0.0, max = 0.0;
    };
    std::vector<ErrorQuantiles> per_resistance;  ///< uncalibrated relative errors
};

/// Per trial, draws c_stor, v_h, v_l_r, f_clk and r_gpio uniformly within the
/// configured tolerances, sweeps the configured resistances through the
/// linear TDDC forward model (pure RC discharge plus series r_gpio), and fits
/// a proportional slope. Trial t uses sub-seed mix(seed, t), so parallel and
/// serial execution give identical results.
MonteCarloSummary run_montecarlo(const ExperimentConfig& cfg);

void write_montecarlo_slopes_csv(std::ostream& os, const MonteCarloSummary& s);
void write_montecarlo_errors_csv(std::ostream& os, const MonteCarloSummary& s);

struct SimulateResult {
    node::CycleRunResult run;
    std::vector<std::string> beacon_log_lines;  ///< after the channel model
};

/// Full work-cycle run plus the lossy-channel pass over the emitted beacons.
SimulateResult run_simulate(const ExperimentConfig& cfg, double r_m, int n_cycles);

struct SizeReport {
    double e_m = 0.0;           ///< [J] per-measurement energy
    double c_stor_min = 0.0;    ///< [F] for e_act_max
    double e_act_max = 0.0;     ///< [J] sizing energy used
    double r_min = 0.0;         ///< [ohm]
    double r_max = 0.0;         ///< [ohm] r_max_hard / margin
    double r_max_hard = 0.0;    ///< [ohm]
    double model_slope = 0.0;   ///< pulses per ohm at node nominals
};

/// Derived design constants at the node's nominal parameters. e_act_max
/// defaults to the configured send energy (the costliest active phase).
SizeReport compute_size(const ExperimentConfig& cfg,
                        std::optional<double> e_act_max = std::nullopt);

void write_size_csv(std::ostream& os, const SizeReport& s);
void write_size_text(std::ostream& os, const SizeReport& s);

} // namespace eawsn::cli
