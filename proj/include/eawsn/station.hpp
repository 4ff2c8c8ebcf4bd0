#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eawsn/station_types.hpp"

namespace eawsn::station {

/// Node constants as declared at the base station; may deliberately differ
/// from the node's true values (that mismatch is what calibration corrects).
struct DecodeParams {
    double f_clk = 37e3;    ///< [Hz]
    double c_stor = 440e-6; ///< [F]
    double v_h = 3.15;      ///< [V]
    double v_l_r = 2.85;    ///< [V]
    double p_q = 2.5e-6;    ///< [W]
    double e_act = 396e-6;  ///< [J] active-phase energy recovered by the reported harvest
};

void validate(const DecodeParams& p);

/// Pulses per ohm of the linear count model: f_clk * c_stor * ln(v_h / v_l_r).
double model_slope(const DecodeParams& p);

/// R_m = n_m / (f_clk * c_stor * ln(v_h / v_l_r)).
double resistance_from_count(std::uint32_t n_m, const DecodeParams& p);

/// P_geh = e_act * f_clk / n_h + p_q. Throws std::invalid_argument on n_h == 0.
double power_from_harvest_count(std::uint32_t n_h, const DecodeParams& p);

struct FitError : std::invalid_argument {
    enum class Reason { kInsufficientPoints, kDegenerateInputs };
    FitError(Reason r, const char* msg) : std::invalid_argument(msg), reason(r) {}
    Reason reason;
};

/// Least-squares fit of n_m = slope * r (+ intercept for kAffine).
/// r_squared is 1 - SS_res/SS_tot with SS_tot taken against mean(n_m).
CalibrationModel fit_calibration(std::span<const CalibrationPoint> points, CalibrationKind kind);

/// Inverse of the fitted response: (n_m - intercept) / slope.
double apply_calibration(const CalibrationModel& m, double n_m);

struct EstimatePair {
    double r_true;
    double r_est;
};

struct ErrorMetrics {
    std::vector<double> relative_errors;  ///< (r_est - r_true) / r_true per pair
    double max_abs_relative = 0.0;
    double r_squared = 0.0;  ///< of r_est against r_true (identity model, mean of r_est)
};

/// Throws std::invalid_argument on empty input or any r_true <= 0.
ErrorMetrics error_metrics(std::span<const EstimatePair> pairs);

enum class EstimateSource { kModel, kCalibrated };
const char* to_string(EstimateSource s);

struct EstimateReport {
    std::uint16_t node_id = 0;
    std::uint8_t seq = 0;
    std::uint32_t n_m = 0;
    double r_m_est = 0.0;
    bool in_range = false;     ///< r_min < r_m_est and margin_ratio >= margin
    double margin_ratio = 0.0; ///< (v_l_r^2 / r_m_est) / (p_geh_est - p_q)
    EstimateSource source = EstimateSource::kModel;
};

struct IngestOptions {
    double margin = 10.0;  ///< required condition margin for in_range
};

struct IngestDiagnostic {
    std::size_t line_no;  ///< 1-based
    std::string message;
};

struct IngestResult {
    std::vector<EstimateReport> reports;
    std::vector<IngestDiagnostic> diagnostics;
    std::size_t lines_seen = 0;        ///< non-blank input lines
    std::size_t lines_rejected = 0;    ///< malformed / bad-crc / bad-length
    std::size_t duplicates_dropped = 0;
};

/// Consumes the wire module's hex beacon log: decodes each line, drops
/// malformed ones with a per-line diagnostic, deduplicates by (node_id, seq)
/// keeping the first occurrence (sliding window of 128 per node), and emits
/// one report per retained beacon, in input order.
IngestResult ingest_log(std::istream& lines, const DecodeParams& p,
                        const CalibrationModel* cal = nullptr, const IngestOptions& opt = {});

/// Same pipeline for pre-decoded counts in CSV form; requires a header row
/// with columns node_id, seq, n_m, n_h (any order, extras ignored).
IngestResult ingest_counts_csv(std::istream& lines, const DecodeParams& p,
                               const CalibrationModel* cal = nullptr,
                               const IngestOptions& opt = {});

/// CSV with header node_id,seq,n_m,r_est_ohm,in_range,margin_ratio,source.
void write_reports_csv(std::ostream& os, std::span<const EstimateReport> reports);

// Calibration file: key=value lines (kind, slope, intercept, r_squared, n_points).
void save_calibration(std::ostream& os, const CalibrationModel& m);
CalibrationModel load_calibration(std::istream& is);  // throws std::runtime_error

} // namespace eawsn::station
