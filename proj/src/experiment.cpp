#include "eawsn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <thread>

#include "eawsn/csv.hpp"

namespace eawsn::cli {

namespace {

// Sub-seed streams within one experiment seed.
constexpr std::uint64_t kStreamNode = 0;      // consumed inside node::run_cycles
constexpr std::uint64_t kStreamChannel = 1;

double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

void parallel_for(int n, const std::function<void(int)>& body) {
    const unsigned hw = std::thread::hardware_concurrency();
    const int workers = static_cast<int>(std::clamp(hw, 1u, 8u));
    if (workers == 1 || n < 64) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

std::string opt_str(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

} // namespace

SweepResult run_sweep(const ExperimentConfig& cfg, const station::CalibrationModel* external_cal) {
    validate(cfg);
    SweepResult result;
    Rng rng(Rng::mix(cfg.seed, kStreamNode));

    std::vector<station::CalibrationPoint> points;
    for (double r : cfg.sweep_r_values) {
        SweepRow row;
        row.r_true = r;
        const auto m = node::run_measurement(cfg.node, r, &rng);
        if (m.stalled) {
            row.stall = true;
        } else {
            row.n_m = m.n_m.count;
            row.r_est_model = station::resistance_from_count(m.n_m.count, cfg.decode);
            points.push_back({r, static_cast<double>(m.n_m.count)});
        }
        result.rows.push_back(row);
    }

    if (external_cal) {
        result.calibration = *external_cal;
    } else if (!points.empty()) {
        result.calibration = station::fit_calibration(points, station::CalibrationKind::kProportional);
    }
    if (result.calibration) {
        for (auto& row : result.rows)
            if (row.n_m)
                row.r_est_calibrated =
                    station::apply_calibration(*result.calibration, static_cast<double>(*row.n_m));
    }
    return result;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
    os << "r_true_ohm,n_m,r_est_model_ohm,r_est_calibrated_ohm,stall\n";
    for (const auto& row : result.rows) {
        os << format_double(row.r_true) << ',';
        if (row.n_m) os << *row.n_m;
        os << ',' << opt_str(row.r_est_model) << ',' << opt_str(row.r_est_calibrated) << ','
           << (row.stall ? '1' : '0') << '\n';
    }
}

MonteCarloSummary run_montecarlo(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto& mc = cfg.montecarlo;
    const auto& nominal = cfg.node.electrical;
    if (!(nominal.v_l_r + mc.v_thresh_tol < nominal.v_h - mc.v_thresh_tol))
        throw ConfigError("montecarlo: v_thresh_tol large enough to cross the thresholds");
    if (cfg.sweep_r_values.empty())
        throw ConfigError("montecarlo: sweep resistance list is empty");

    const int n_trials = mc.n_trials;
    const double decode_slope = station::model_slope(cfg.decode);
    const auto n_r = cfg.sweep_r_values.size();

    MonteCarloSummary out;
    out.slope_samples.assign(static_cast<std::size_t>(n_trials), 0.0);
    std::vector<std::vector<double>> errors(n_r,
                                            std::vector<double>(static_cast<std::size_t>(n_trials)));

    parallel_for(n_trials, [&](int trial) {
        Rng rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(trial)));
        physics::ElectricalParams e = nominal;
        e.c_stor = nominal.c_stor * (1.0 + rng.uniform(-mc.c_tol, mc.c_tol));
        e.v_h = nominal.v_h + rng.uniform(-mc.v_thresh_tol, mc.v_thresh_tol);
        e.v_l_r = nominal.v_l_r + rng.uniform(-mc.v_thresh_tol, mc.v_thresh_tol);
        const double f_clk = cfg.node.f_clk_nominal * (1.0 + rng.uniform(-mc.clk_tol, mc.clk_tol));
        e.r_gpio = rng.uniform(mc.r_gpio_min, mc.r_gpio_max);

        std::vector<station::CalibrationPoint> points;
        points.reserve(n_r);
        for (std::size_t i = 0; i < n_r; ++i) {
            const double r = cfg.sweep_r_values[i];
            const double t_m = physics::discharge_time_closed_form(r, e);
            const auto n = node::quantize_count(t_m, f_clk);
            points.push_back({r, static_cast<double>(n.count)});
            const double r_est = static_cast<double>(n.count) / decode_slope;
            errors[i][static_cast<std::size_t>(trial)] = (r_est - r) / r;
        }
        const auto fit = station::fit_calibration(points, station::CalibrationKind::kProportional);
        out.slope_samples[static_cast<std::size_t>(trial)] = fit.slope;
    });

    out.slope_min = *std::min_element(out.slope_samples.begin(), out.slope_samples.end());
    out.slope_max = *std::max_element(out.slope_samples.begin(), out.slope_samples.end());
    double sum = 0.0;
    for (double s : out.slope_samples) sum += s;
    // Summation rounding must not push the mean outside the sample range.
    out.slope_mean = std::clamp(sum / static_cast<double>(n_trials), out.slope_min, out.slope_max);

    for (std::size_t i = 0; i < n_r; ++i) {
        auto& errs = errors[i];
        std::sort(errs.begin(), errs.end());
        MonteCarloSummary::ErrorQuantiles q;
        q.r = cfg.sweep_r_values[i];
        q.min = errs.front();
        q.p05 = quantile(errs, 0.05);
        q.p50 = quantile(errs, 0.50);
        q.p95 = quantile(errs, 0.95);
        q.max = errs.back();
        out.per_resistance.push_back(q);
    }
    return out;
}

void write_montecarlo_slopes_csv(std::ostream& os, const MonteCarloSummary& s) {
    os << "trial,slope_per_ohm\n";
    for (std::size_t i = 0; i < s.slope_samples.size(); ++i)
        os << i << ',' << format_double(s.slope_samples[i]) << '\n';
}

void write_montecarlo_errors_csv(std::ostream& os, const MonteCarloSummary& s) {
    os << "r_ohm,rel_err_min,rel_err_p05,rel_err_p50,rel_err_p95,rel_err_max\n";
    for (const auto& q : s.per_resistance) {
        os << format_double(q.r) << ',' << format_double(q.min) << ',' << format_double(q.p05)
           << ',' << format_double(q.p50) << ',' << format_double(q.p95) << ','
           << format_double(q.max) << '\n';
    }
}

SimulateResult run_simulate(const ExperimentConfig& cfg, double r_m, int n_cycles) {
    validate(cfg);
    SimulateResult out;
    out.run = node::run_cycles(cfg.node, r_m, n_cycles, cfg.seed);

    std::vector<wire::Frame> frames;
    frames.reserve(out.run.beacons.size());
    for (const auto& b : out.run.beacons) frames.push_back(wire::encode_beacon(b));
    const auto delivered = wire::channel_pass(frames, cfg.channel, Rng::mix(cfg.seed, kStreamChannel));
    out.beacon_log_lines.reserve(delivered.size());
    for (const auto& f : delivered) out.beacon_log_lines.push_back(wire::to_hex(f));
    return out;
}

SizeReport compute_size(const ExperimentConfig& cfg, std::optional<double> e_act_max) {
    validate(cfg);
    const auto& e = cfg.node.electrical;
    SizeReport s;
    s.e_m = physics::measurement_energy(e);
    s.e_act_max = e_act_max.value_or(cfg.node.e_act_send);
    s.c_stor_min = physics::min_storage_capacitance(s.e_act_max, e.v_h, e.v_l_min);
    const auto range = physics::validity_range(e, cfg.node.f_clk_nominal, cfg.margin);
    s.r_min = range.r_min;
    s.r_max = range.r_max;
    s.r_max_hard = range.r_max_hard;
    s.model_slope = cfg.node.f_clk_nominal * e.c_stor * std::log(e.v_h / e.v_l_r);
    return s;
}

void write_size_csv(std::ostream& os, const SizeReport& s) {
    os << "name,value\n"
       << "e_m_j," << format_double(s.e_m) << '\n'
       << "e_act_max_j," << format_double(s.e_act_max) << '\n'
       << "c_stor_min_f," << format_double(s.c_stor_min) << '\n'
       << "r_min_ohm," << format_double(s.r_min) << '\n'
       << "r_max_ohm," << format_double(s.r_max) << '\n'
       << "r_max_hard_ohm," << format_double(s.r_max_hard) << '\n'
       << "model_slope_per_ohm," << format_double(s.model_slope) << '\n';
}

void write_size_text(std::ostream& os, const SizeReport& s) {
    os << "e_m                 = " << format_double(s.e_m) << " J\n"
       << "e_act_max           = " << format_double(s.e_act_max) << " J\n"
       << "c_stor_min          = " << format_double(s.c_stor_min) << " F\n"
       << "r_min               = " << format_double(s.r_min) << " ohm\n"
       << "r_max (margin)      = " << format_double(s.r_max) << " ohm\n"
       << "r_max_hard          = " << format_double(s.r_max_hard) << " ohm\n"
       << "model slope         = " << format_double(s.model_slope) << " pulses/ohm\n";
}

} // namespace eawsn::cli
