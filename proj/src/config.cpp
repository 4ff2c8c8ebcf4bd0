#include "eawsn/config.hpp"

#include <cmath>
#include <istream>
#include <set>

#include "eawsn/csv.hpp"

namespace eawsn::cli {

namespace {

double as_double(const std::string& key, std::string_view value) {
    double v = 0.0;
    if (!parse_double(value, v))
        throw ConfigError("config: bad number for " + key + ": '" + std::string(value) + "'");
    return v;
}

std::uint64_t as_u64(const std::string& key, std::string_view value) {
    std::uint64_t v = 0;
    if (!parse_u64(value, v))
        throw ConfigError("config: bad integer for " + key + ": '" + std::string(value) + "'");
    return v;
}

bool as_bool(const std::string& key, std::string_view value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + std::string(value) + "'");
}

std::vector<double> as_double_list(const std::string& key, std::string_view value) {
    std::vector<double> out;
    for (auto item : split(value, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(as_double(key, item));
    }
    return out;
}

std::vector<node::ActivePhase> as_schedule(std::string_view value) {
    std::vector<node::ActivePhase> out;
    for (auto item : split(value, ',')) {
        item = trim(item);
        if (item == "measure") out.push_back(node::ActivePhase::kMeasure);
        else if (item == "send") out.push_back(node::ActivePhase::kSend);
        else if (!item.empty())
            throw ConfigError("config: unknown schedule entry '" + std::string(item) + "'");
    }
    return out;
}

node::MeasureSolver as_solver(std::string_view value) {
    if (value == "constant_net_power") return node::MeasureSolver::kConstantNetPower;
    if (value == "numeric") return node::MeasureSolver::kNumeric;
    if (value == "closed_form") return node::MeasureSolver::kClosedForm;
    throw ConfigError("config: unknown measure_solver '" + std::string(value) + "'");
}

} // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    for (int r = 50; r <= 800; r += 50) cfg.sweep_r_values.push_back(static_cast<double>(r));
    return cfg;
}

ExperimentConfig load_config(std::istream& is) {
    ExperimentConfig cfg = default_config();
    std::set<std::string> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key=value, got '" + std::string(text) + "'");
        const std::string key{trim(text.substr(0, eq))};
        const auto value = trim(text.substr(eq + 1));
        seen.insert(key);

        auto& n = cfg.node;
        auto& e = n.electrical;
        auto& d = cfg.decode;
        auto& mc = cfg.montecarlo;

        if (key == "node.c_stor_f") e.c_stor = as_double(key, value);
        else if (key == "node.v_h_v") e.v_h = as_double(key, value);
        else if (key == "node.v_l_r_v") e.v_l_r = as_double(key, value);
        else if (key == "node.v_l_send_v") e.v_l_send = as_double(key, value);
        else if (key == "node.v_l_min_v") e.v_l_min = as_double(key, value);
        else if (key == "node.p_q_w") e.p_q = as_double(key, value);
        else if (key == "node.p_geh_w") e.p_geh = as_double(key, value);
        else if (key == "node.r_gpio_ohm") e.r_gpio = as_double(key, value);
        else if (key == "node.node_id") n.node_id = static_cast<std::uint16_t>(as_u64(key, value));
        else if (key == "node.f_clk_hz") n.f_clk_nominal = as_double(key, value);
        else if (key == "node.f_clk_error") n.f_clk_error = as_double(key, value);
        else if (key == "node.e_act_send_j") n.e_act_send = as_double(key, value);
        else if (key == "node.t_send_s") n.t_send = as_double(key, value);
        else if (key == "node.pvd_grid_enabled") n.pvd_grid_enabled = as_bool(key, value);
        else if (key == "node.pvd_grid_step_v") n.pvd_grid_step = as_double(key, value);
        else if (key == "node.schedule") n.schedule = as_schedule(value);
        else if (key == "node.measure_solver") n.measure_solver = as_solver(value);
        else if (key == "node.count_jitter_enabled") n.count_jitter_enabled = as_bool(key, value);
        else if (key == "decode.f_clk_hz") d.f_clk = as_double(key, value);
        else if (key == "decode.c_stor_f") d.c_stor = as_double(key, value);
        else if (key == "decode.v_h_v") d.v_h = as_double(key, value);
        else if (key == "decode.v_l_r_v") d.v_l_r = as_double(key, value);
        else if (key == "decode.p_q_w") d.p_q = as_double(key, value);
        else if (key == "decode.e_act_j") d.e_act = as_double(key, value);
        else if (key == "decode.margin") cfg.margin = as_double(key, value);
        else if (key == "sweep.r_values_ohm") cfg.sweep_r_values = as_double_list(key, value);
        else if (key == "montecarlo.n_trials") mc.n_trials = static_cast<int>(as_u64(key, value));
        else if (key == "montecarlo.c_tol") mc.c_tol = as_double(key, value);
        else if (key == "montecarlo.v_thresh_tol_v") mc.v_thresh_tol = as_double(key, value);
        else if (key == "montecarlo.clk_tol") mc.clk_tol = as_double(key, value);
        else if (key == "montecarlo.r_gpio_min_ohm") mc.r_gpio_min = as_double(key, value);
        else if (key == "montecarlo.r_gpio_max_ohm") mc.r_gpio_max = as_double(key, value);
        else if (key == "seed") cfg.seed = as_u64(key, value);
        else if (key == "channel.loss_probability") cfg.channel.loss_probability = as_double(key, value);
        else if (key == "channel.duplicate_probability") cfg.channel.duplicate_probability = as_double(key, value);
        else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" +
                               key + "'");
    }

    // Energies follow the (possibly overridden) electrical values unless the
    // file pins them explicitly.
    if (!seen.count("node.e_act_send_j"))
        cfg.node.e_act_send = node::default_send_energy(cfg.node.electrical);
    if (!seen.count("decode.e_act_j"))
        cfg.decode.e_act =
            0.5 * cfg.decode.c_stor * (cfg.decode.v_h * cfg.decode.v_h -
                                       cfg.decode.v_l_r * cfg.decode.v_l_r);

    validate(cfg);
    return cfg;
}

void validate(const ExperimentConfig& cfg) {
    try {
        node::validate(cfg.node);
        station::validate(cfg.decode);
        wire::validate(cfg.channel);
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    }
    if (!(cfg.margin >= 1.0)) throw ConfigError("config: decode.margin must be >= 1");
    for (double r : cfg.sweep_r_values)
        if (!(r > 0.0)) throw ConfigError("config: sweep resistances must be > 0");
    const auto& mc = cfg.montecarlo;
    if (mc.n_trials < 1) throw ConfigError("config: montecarlo.n_trials must be >= 1");
    if (mc.c_tol < 0.0 || mc.v_thresh_tol < 0.0 || mc.clk_tol < 0.0)
        throw ConfigError("config: montecarlo tolerances must be >= 0");
    if (!(mc.c_tol < 1.0 && mc.clk_tol < 1.0))
        throw ConfigError("config: relative tolerances must be < 1");
    if (mc.r_gpio_min < 0.0 || mc.r_gpio_max < mc.r_gpio_min)
        throw ConfigError("config: montecarlo r_gpio range must satisfy 0 <= min <= max");
}

} // namespace eawsn::cli
