#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "eawsn/node.hpp"
#include "eawsn/station.hpp"
#include "eawsn/wire.hpp"

namespace eawsn::cli {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MonteCarloConfig {
    int n_trials = 1000;
    double c_tol = 0.20;         ///< relative, +- on c_stor
    double v_thresh_tol = 0.05;  ///< volts, +- on v_h and v_l_r
    double clk_tol = 0.05;       ///< relative, +- on f_clk
    double r_gpio_min = 0.0;     ///< [ohm]
    double r_gpio_max = 100.0;   ///< [ohm]
};

struct ExperimentConfig {
    node::NodeParams node;
    station::DecodeParams decode;
    double margin = 10.0;  ///< condition margin required for in_range
    std::vector<double> sweep_r_values;
    MonteCarloConfig montecarlo;
    std::uint64_t seed = 1;
    wire::ChannelConfig channel;
};

/// Nominal operating point: 37 kHz, 440 uF, 3.15/2.85 V thresholds, 2.5 uW
/// quiescent, 1 mW harvest, sweep {50, 100, ..., 800} ohm.
ExperimentConfig default_config();

/// Flat key=value text with dotted section prefixes (node.c_stor_f=440e-6).
/// '#' starts a comment line. Unknown keys are errors. When electrical keys
/// change and node.e_act_send_j / decode.e_act_j are not given explicitly,
/// those energies are recomputed from the new values.
ExperimentConfig load_config(std::istream& is);

void validate(const ExperimentConfig& cfg);

} // namespace eawsn::cli
