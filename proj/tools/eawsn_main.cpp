// Experiment harness for the energy-autonomous resistive sensor node
// simulator: forward work-cycle simulation, TDDC response sweeps, component
// tolerance Monte Carlo, beacon-log decoding and calibration.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "eawsn/config.hpp"
#include "eawsn/csv.hpp"
#include "eawsn/experiment.hpp"

namespace {

using namespace eawsn;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPhysics = 3;
constexpr int kExitIo = 4;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

cli::ExperimentConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return cli::default_config();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    return cli::load_config(in);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open output file: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

std::optional<station::CalibrationModel> load_calibration_file(const std::string& path) {
    if (path.empty()) return std::nullopt;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open calibration file: " + path);
    return station::load_calibration(in);
}

int cmd_simulate(const cli::ExperimentConfig& cfg, double r_ohm, int cycles,
                 const std::string& out_base) {
    const auto result = cli::run_simulate(cfg, r_ohm, cycles);

    std::ostringstream trace, events, log;
    result.run.trace.write_samples_csv(trace);
    result.run.trace.write_events_csv(events);
    for (const auto& line : result.beacon_log_lines) log << line << '\n';
    write_file(out_base + ".trace.csv", trace.str());
    write_file(out_base + ".events.csv", events.str());
    write_file(out_base + ".beacons.log", log.str());

    std::cout << "beacons emitted: " << result.run.beacons.size()
              << ", delivered: " << result.beacon_log_lines.size() << '\n';
    if (!result.run.completed) {
        const auto& ev = result.run.trace.events.back();
        std::cerr << "terminated early: " << node::to_string(ev.kind) << " at t="
                  << ev.t << " s\n";
        return kExitPhysics;
    }
    return kExitOk;
}

int cmd_sweep(const cli::ExperimentConfig& cfg, const std::string& cal_path,
              const std::string& out_path) {
    const auto cal = load_calibration_file(cal_path);
    const auto result = cli::run_sweep(cfg, cal ? &*cal : nullptr);
    std::ostringstream os;
    cli::write_sweep_csv(os, result);
    if (out_path.empty()) std::cout << os.str();
    else write_file(out_path, os.str());
    return kExitOk;
}

int cmd_montecarlo(const cli::ExperimentConfig& cfg, const std::string& out_base) {
    const auto summary = cli::run_montecarlo(cfg);
    if (!out_base.empty()) {
        std::ostringstream slopes, errors;
        cli::write_montecarlo_slopes_csv(slopes, summary);
        cli::write_montecarlo_errors_csv(errors, summary);
        write_file(out_base + ".slopes.csv", slopes.str());
        write_file(out_base + ".errors.csv", errors.str());
    }
    std::cout << "trials: " << summary.slope_samples.size() << '\n'
              << "slope_min: " << format_double(summary.slope_min) << '\n'
              << "slope_mean: " << format_double(summary.slope_mean) << '\n'
              << "slope_max: " << format_double(summary.slope_max) << '\n';
    return kExitOk;
}

int cmd_estimate(const cli::ExperimentConfig& cfg, const std::string& log_path,
                 const std::string& cal_path, const std::string& format,
                 const std::string& out_path) {
    std::ifstream in(log_path);
    if (!in) throw IoError("cannot open beacon log: " + log_path);
    const auto cal = load_calibration_file(cal_path);
    const station::CalibrationModel* calp = cal ? &*cal : nullptr;
    const station::IngestOptions opt{cfg.margin};

    station::IngestResult result;
    if (format == "hex") result = station::ingest_log(in, cfg.decode, calp, opt);
    else if (format == "csv") result = station::ingest_counts_csv(in, cfg.decode, calp, opt);
    else throw cli::ConfigError("estimate: --input-format must be hex or csv");

    std::ostringstream os;
    station::write_reports_csv(os, result.reports);
    if (out_path.empty()) std::cout << os.str();
    else write_file(out_path, os.str());

    for (const auto& d : result.diagnostics)
        std::cerr << "line " << d.line_no << ": " << d.message << '\n';
    std::cerr << "frames: " << result.lines_seen << ", rejected: " << result.lines_rejected
              << ", duplicates dropped: " << result.duplicates_dropped << '\n';
    if (result.lines_seen > 0 && result.reports.empty())
        std::cerr << "warning: all frames rejected or duplicated\n";
    return kExitOk;
}

int cmd_calibrate(const std::string& csv_path, const std::string& kind_name,
                  const std::string& out_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open input CSV: " + csv_path);

    int col_r = -1, col_n = -1;
    std::vector<station::CalibrationPoint> points;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) continue;
        const auto cols = split(text, ',');
        if (col_r < 0) {
            for (std::size_t i = 0; i < cols.size(); ++i) {
                const auto name = trim(cols[i]);
                if (name == "r_true_ohm") col_r = static_cast<int>(i);
                else if (name == "n_m") col_n = static_cast<int>(i);
            }
            if (col_r < 0 || col_n < 0)
                throw cli::ConfigError("calibrate: CSV header must name r_true_ohm and n_m");
            continue;
        }
        const auto max_col = static_cast<std::size_t>(std::max(col_r, col_n));
        double r = 0.0, n = 0.0;
        if (cols.size() <= max_col ||
            !parse_double(cols[static_cast<std::size_t>(col_r)], r) ||
            !parse_double(cols[static_cast<std::size_t>(col_n)], n)) {
            std::cerr << "calibrate: skipping malformed line " << line_no << '\n';
            continue;
        }
        points.push_back({r, n});
    }

    const auto kind = kind_name == "affine" ? station::CalibrationKind::kAffine
                                            : station::CalibrationKind::kProportional;
    const auto model = station::fit_calibration(points, kind);
    std::ostringstream os;
    station::save_calibration(os, model);
    if (out_path.empty()) std::cout << os.str();
    else write_file(out_path, os.str());
    return kExitOk;
}

int cmd_size(const cli::ExperimentConfig& cfg, std::optional<double> e_act_max,
             const std::string& out_path) {
    const auto report = cli::compute_size(cfg, e_act_max);
    if (out_path.empty()) {
        cli::write_size_text(std::cout, report);
    } else {
        std::ostringstream os;
        cli::write_size_csv(os, report);
        write_file(out_path, os.str());
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-autonomous resistive sensor node simulator and base-station toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand name

    std::string config_path, out_path, cal_path;
    std::optional<std::uint64_t> seed_override;
    app.add_option("--config", config_path, "key=value experiment config file")
        ->configurable(false);
    app.add_option("--seed", seed_override, "override the config seed");
    app.add_option("--out", out_path, "output path (or base path for multi-file commands)");

    auto* sim = app.add_subcommand("simulate", "run work cycles; emit trace, events and beacon log");
    double r_ohm = 1000.0;
    int cycles = 1;
    sim->add_option("--r-ohm", r_ohm, "measured resistance [ohm]")->required();
    sim->add_option("--cycles", cycles, "number of schedule passes");

    auto* sweep = app.add_subcommand("sweep", "one measurement per configured resistance");
    sweep->add_option("--calibration", cal_path, "calibration file for the calibrated column");

    auto* mc = app.add_subcommand("montecarlo", "component-tolerance Monte Carlo over the sweep");
    std::optional<int> trials_override;
    mc->add_option("--trials", trials_override, "override montecarlo.n_trials");

    auto* est = app.add_subcommand("estimate", "decode a beacon log into resistance reports");
    std::string log_path, input_format = "hex";
    est->add_option("log", log_path, "beacon log file")->required();
    est->add_option("--calibration", cal_path, "calibration file (switches to calibrated source)");
    est->add_option("--input-format", input_format, "hex (wire log) or csv (node_id,seq,n_m,n_h)");

    auto* calib = app.add_subcommand("calibrate", "fit a calibration from a (r_true_ohm, n_m) CSV");
    std::string calib_csv, kind_name = "proportional";
    calib->add_option("csv", calib_csv, "input CSV with columns r_true_ohm, n_m")->required();
    calib->add_option("--kind", kind_name, "proportional or affine")
        ->check(CLI::IsMember({"proportional", "affine"}));

    auto* size = app.add_subcommand("size", "derived design constants for the configured node");
    std::optional<double> e_act_max;
    size->add_option("--e-act-max-j", e_act_max, "sizing energy [J] (default: send energy)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        auto cfg = load_config_or_default(config_path);
        if (seed_override) cfg.seed = *seed_override;
        if (trials_override) cfg.montecarlo.n_trials = *trials_override;
        cli::validate(cfg);

        if (sim->parsed()) {
            if (out_path.empty()) throw cli::ConfigError("simulate: --out is required");
            return cmd_simulate(cfg, r_ohm, cycles, out_path);
        }
        if (sweep->parsed()) return cmd_sweep(cfg, cal_path, out_path);
        if (mc->parsed()) return cmd_montecarlo(cfg, out_path);
        if (est->parsed()) return cmd_estimate(cfg, log_path, cal_path, input_format, out_path);
        if (calib->parsed()) return cmd_calibrate(calib_csv, kind_name, out_path);
        if (size->parsed()) return cmd_size(cfg, e_act_max, out_path);
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const physics::NoNetHarvestError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPhysics;
    } catch (const cli::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
