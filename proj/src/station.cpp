#include "eawsn/station.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <map>
#include <ostream>

#include "eawsn/csv.hpp"
#include "eawsn/wire.hpp"

namespace eawsn::station {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// First-wins dedup keyed on (node_id, seq) with a sliding window of the last
// 128 distinct seqs per node, so wrapped seqs come back after eviction.
class DedupWindow {
public:
    bool is_duplicate(std::uint16_t node_id, std::uint8_t seq) {
        auto& st = nodes_[node_id];
        if (st.seen[seq]) return true;
        st.seen[seq] = true;
        st.order.push_back(seq);
        if (st.order.size() > 128) {
            st.seen[st.order.front()] = false;
            st.order.pop_front();
        }
        return false;
    }

private:
    struct NodeState {
        std::array<bool, 256> seen{};
        std::deque<std::uint8_t> order;
    };
    std::map<std::uint16_t, NodeState> nodes_;
};

EstimateReport make_report(const wire::Beacon& b, const DecodeParams& p,
                           const CalibrationModel* cal, const IngestOptions& opt) {
    EstimateReport rep;
    rep.node_id = b.node_id;
    rep.seq = b.seq;
    rep.n_m = b.n_m;
    if (cal) {
        rep.r_m_est = apply_calibration(*cal, static_cast<double>(b.n_m));
        rep.source = EstimateSource::kCalibrated;
    } else {
        rep.r_m_est = resistance_from_count(b.n_m, p);
        rep.source = EstimateSource::kModel;
    }

    // Harvest count -> estimated net power -> condition margin. n_h = 0 means
    // the harvest looked instantaneous (unbounded power), so the margin is 0.
    if (b.n_h == 0) {
        rep.margin_ratio = 0.0;
    } else if (rep.r_m_est == 0.0) {
        rep.margin_ratio = std::numeric_limits<double>::infinity();
    } else {
        const double net_power = p.e_act * p.f_clk / static_cast<double>(b.n_h);
        rep.margin_ratio = (p.v_l_r * p.v_l_r / rep.r_m_est) / net_power;
    }

    const double r_min = 2.0 / model_slope(p);
    rep.in_range = r_min < rep.r_m_est && rep.margin_ratio >= opt.margin;
    return rep;
}

} // namespace

void validate(const DecodeParams& p) {
    require(p.f_clk > 0.0 && p.c_stor > 0.0 && p.p_q >= 0.0 && p.e_act > 0.0,
            "DecodeParams: f_clk, c_stor, e_act must be > 0 and p_q >= 0");
    require(p.v_l_r > 0.0 && p.v_h > p.v_l_r, "DecodeParams: need v_h > v_l_r > 0");
}

double model_slope(const DecodeParams& p) {
    validate(p);
    return p.f_clk * p.c_stor * std::log(p.v_h / p.v_l_r);
}

double resistance_from_count(std::uint32_t n_m, const DecodeParams& p) {
    return static_cast<double>(n_m) / model_slope(p);
}

double power_from_harvest_count(std::uint32_t n_h, const DecodeParams& p) {
    validate(p);
    require(n_h > 0, "power_from_harvest_count: n_h must be > 0");
    return p.e_act * p.f_clk / static_cast<double>(n_h) + p.p_q;
}

CalibrationModel fit_calibration(std::span<const CalibrationPoint> points, CalibrationKind kind) {
    const std::size_t min_points = kind == CalibrationKind::kAffine ? 2 : 1;
    if (points.size() < min_points)
        throw FitError(FitError::Reason::kInsufficientPoints,
                       "fit_calibration: not enough points for this kind");

    CalibrationModel m;
    m.kind = kind;
    m.n_points = points.size();

    const double n = static_cast<double>(points.size());
    if (kind == CalibrationKind::kProportional) {
        double srr = 0.0, srn = 0.0;
        for (const auto& pt : points) {
            srr += pt.r_true * pt.r_true;
            srn += pt.r_true * pt.n_m;
        }
        if (srr <= 0.0)
            throw FitError(FitError::Reason::kDegenerateInputs,
                           "fit_calibration: resistances are all zero");
        m.slope = srn / srr;
        m.intercept = 0.0;
    } else {
        double sr = 0.0, sn = 0.0;
        for (const auto& pt : points) {
            sr += pt.r_true;
            sn += pt.n_m;
        }
        const double r_mean = sr / n, n_mean = sn / n;
        double sxx = 0.0, sxy = 0.0;
        for (const auto& pt : points) {
            sxx += (pt.r_true - r_mean) * (pt.r_true - r_mean);
            sxy += (pt.r_true - r_mean) * (pt.n_m - n_mean);
        }
        if (sxx == 0.0)
            throw FitError(FitError::Reason::kDegenerateInputs,
                           "fit_calibration: r_true values are all identical");
        m.slope = sxy / sxx;
        m.intercept = n_mean - m.slope * r_mean;
    }

    if (!(m.slope > 0.0))
        throw FitError(FitError::Reason::kDegenerateInputs,
                       "fit_calibration: fitted slope is not positive");

    double sn = 0.0;
    for (const auto& pt : points) sn += pt.n_m;
    const double n_mean = sn / n;
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& pt : points) {
        const double pred = m.slope * pt.r_true + m.intercept;
        ss_res += (pt.n_m - pred) * (pt.n_m - pred);
        ss_tot += (pt.n_m - n_mean) * (pt.n_m - n_mean);
    }
    m.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    return m;
}

double apply_calibration(const CalibrationModel& m, double n_m) {
    require(m.slope > 0.0, "apply_calibration: slope must be > 0");
    return (n_m - m.intercept) / m.slope;
}

ErrorMetrics error_metrics(std::span<const EstimatePair> pairs) {
    require(!pairs.empty(), "error_metrics: empty input");
    ErrorMetrics out;
    out.relative_errors.reserve(pairs.size());
    double s_est = 0.0;
    for (const auto& pr : pairs) {
        require(pr.r_true > 0.0, "error_metrics: r_true must be > 0");
        const double rel = (pr.r_est - pr.r_true) / pr.r_true;
        out.relative_errors.push_back(rel);
        out.max_abs_relative = std::max(out.max_abs_relative, std::abs(rel));
        s_est += pr.r_est;
    }
    const double est_mean = s_est / static_cast<double>(pairs.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& pr : pairs) {
        ss_res += (pr.r_est - pr.r_true) * (pr.r_est - pr.r_true);
        ss_tot += (pr.r_est - est_mean) * (pr.r_est - est_mean);
    }
    out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    return out;
}

const char* to_string(EstimateSource s) {
    return s == EstimateSource::kModel ? "model" : "calibrated";
}

IngestResult ingest_log(std::istream& lines, const DecodeParams& p,
                        const CalibrationModel* cal, const IngestOptions& opt) {
    validate(p);
    IngestResult out;
    DedupWindow dedup;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) continue;
        ++out.lines_seen;

        const auto bytes = wire::from_hex(text);
        if (!bytes) {
            out.diagnostics.push_back({line_no, "invalid hex"});
            ++out.lines_rejected;
            continue;
        }
        const auto decoded = wire::decode_beacon(*bytes);
        if (decoded.status != wire::DecodeStatus::kOk) {
            out.diagnostics.push_back({line_no, wire::to_string(decoded.status)});
            ++out.lines_rejected;
            continue;
        }
        if (dedup.is_duplicate(decoded.beacon.node_id, decoded.beacon.seq)) {
            ++out.duplicates_dropped;
            continue;
        }
        out.reports.push_back(make_report(decoded.beacon, p, cal, opt));
    }
    return out;
}

IngestResult ingest_counts_csv(std::istream& lines, const DecodeParams& p,
                               const CalibrationModel* cal, const IngestOptions& opt) {
    validate(p);
    IngestResult out;
    DedupWindow dedup;
    std::string line;
    std::size_t line_no = 0;
    int col_node = -1, col_seq = -1, col_nm = -1, col_nh = -1;
    while (std::getline(lines, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) continue;

        if (col_node < 0) {  // header row
            const auto cols = split(text, ',');
            for (std::size_t i = 0; i < cols.size(); ++i) {
                const auto name = trim(cols[i]);
                if (name == "node_id") col_node = static_cast<int>(i);
                else if (name == "seq") col_seq = static_cast<int>(i);
                else if (name == "n_m") col_nm = static_cast<int>(i);
                else if (name == "n_h") col_nh = static_cast<int>(i);
            }
            if (col_node < 0 || col_seq < 0 || col_nm < 0 || col_nh < 0)
                throw std::runtime_error(
                    "ingest_counts_csv: header must name node_id, seq, n_m, n_h");
            continue;
        }

        ++out.lines_seen;
        const auto cols = split(text, ',');
        const auto max_col = static_cast<std::size_t>(
            std::max(std::max(col_node, col_seq), std::max(col_nm, col_nh)));
        std::uint64_t node_id = 0, seq = 0, n_m = 0, n_h = 0;
        const bool ok = cols.size() > max_col &&
                        parse_u64(cols[static_cast<std::size_t>(col_node)], node_id) &&
                        parse_u64(cols[static_cast<std::size_t>(col_seq)], seq) &&
                        parse_u64(cols[static_cast<std::size_t>(col_nm)], n_m) &&
                        parse_u64(cols[static_cast<std::size_t>(col_nh)], n_h) &&
                        node_id <= 0xFFFF && seq <= 0xFF && n_m <= 0xFFFFFFFFull &&
                        n_h <= 0xFFFFFFFFull;
        if (!ok) {
            out.diagnostics.push_back({line_no, "malformed CSV row"});
            ++out.lines_rejected;
            continue;
        }

        wire::Beacon b;
        b.node_id = static_cast<std::uint16_t>(node_id);
        b.seq = static_cast<std::uint8_t>(seq);
        b.n_m = static_cast<std::uint32_t>(n_m);
        b.n_h = static_cast<std::uint32_t>(n_h);
        b.flags = wire::kFlagNmValid;
        if (dedup.is_duplicate(b.node_id, b.seq)) {
            ++out.duplicates_dropped;
            continue;
        }
        out.reports.push_back(make_report(b, p, cal, opt));
    }
    return out;
}

void write_reports_csv(std::ostream& os, std::span<const EstimateReport> reports) {
    os << "node_id,seq,n_m,r_est_ohm,in_range,margin_ratio,source\n";
    for (const auto& r : reports) {
        os << r.node_id << ',' << static_cast<unsigned>(r.seq) << ',' << r.n_m << ','
           << format_double(r.r_m_est) << ',' << (r.in_range ? '1' : '0') << ','
           << format_double(r.margin_ratio) << ',' << to_string(r.source) << '\n';
    }
}

void save_calibration(std::ostream& os, const CalibrationModel& m) {
    os << "kind=" << (m.kind == CalibrationKind::kProportional ? "proportional" : "affine")
       << '\n'
       << "slope=" << format_double(m.slope) << '\n'
       << "intercept=" << format_double(m.intercept) << '\n'
       << "r_squared=" << format_double(m.r_squared) << '\n'
       << "n_points=" << m.n_points << '\n';
}

CalibrationModel load_calibration(std::istream& is) {
    CalibrationModel m;
    bool have_kind = false, have_slope = false;
    std::string line;
    while (std::getline(is, line)) {
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw std::runtime_error("load_calibration: expected key=value, got '" +
                                     std::string(text) + "'");
        const auto key = trim(text.substr(0, eq));
        const auto value = trim(text.substr(eq + 1));
        if (key == "kind") {
            if (value == "proportional") m.kind = CalibrationKind::kProportional;
            else if (value == "affine") m.kind = CalibrationKind::kAffine;
            else throw std::runtime_error("load_calibration: unknown kind '" +
                                          std::string(value) + "'");
            have_kind = true;
        } else if (key == "slope" || key == "intercept" || key == "r_squared") {
            double v = 0.0;
            if (!parse_double(value, v))
                throw std::runtime_error("load_calibration: bad number for " + std::string(key));
            if (key == "slope") { m.slope = v; have_slope = true; }
            else if (key == "intercept") m.intercept = v;
            else m.r_squared = v;
        } else if (key == "n_points") {
            std::uint64_t v = 0;
            if (!parse_u64(value, v))
                throw std::runtime_error("load_calibration: bad n_points");
            m.n_points = static_cast<std::size_t>(v);
        } else {
            throw std::runtime_error("load_calibration: unknown key '" + std::string(key) + "'");
        }
    }
    if (!have_kind || !have_slope || !(m.slope > 0.0))
        throw std::runtime_error("load_calibration: file must set kind and a positive slope");
    return m;
}

} // namespace eawsn::station
