#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "eawsn/node.hpp"
#include "eawsn/station.hpp"
#include "eawsn/wire.hpp"

using namespace eawsn;
using namespace eawsn::station;

namespace {

constexpr double kNominalSlope = 1.6293587053076741;  // 37 kHz * 440 uF * ln(3.15/2.85)

std::vector<double> default_grid() {
    std::vector<double> r;
    for (int v = 50; v <= 800; v += 50) r.push_back(v);
    return r;
}

std::string log_line(const wire::Beacon& b) { return wire::to_hex(wire::encode_beacon(b)); }

wire::Beacon sample_beacon(std::uint8_t seq, std::uint32_t n_m = 1629,
                           std::uint32_t n_h = 1953600) {
    wire::Beacon b;
    b.node_id = 1;
    b.seq = seq;
    b.n_m = n_m;
    b.n_h = n_h;
    b.flags = wire::kFlagNmValid;
    return b;
}

} // namespace

TEST_CASE("model slope and count decode at the experimental parameters") {
    DecodeParams p;
    CHECK(model_slope(p) == doctest::Approx(kNominalSlope).epsilon(1e-12));
    CHECK(model_slope(p) == doctest::Approx(1.629).epsilon(1e-3));
    CHECK(resistance_from_count(1629, p) == doctest::Approx(999.779848779458).epsilon(1e-12));
    CHECK(resistance_from_count(0, p) == 0.0);
}

TEST_CASE("harvest count decodes back to the harvested power") {
    DecodeParams p;  // e_act = 396 uJ
    CHECK(power_from_harvest_count(1953600, p) == doctest::Approx(10e-6).epsilon(1e-9));
    CHECK_THROWS_AS(power_from_harvest_count(0, p), std::invalid_argument);

    // Asymptote: enormous n_h means the harvest barely beats p_q.
    CHECK(power_from_harvest_count(4000000000u, p) ==
          doctest::Approx(p.p_q).epsilon(2e-3));

    const double excess_full = power_from_harvest_count(1953600, p) - p.p_q;
    const double excess_half = power_from_harvest_count(976800, p) - p.p_q;
    CHECK(excess_half == doctest::Approx(2.0 * excess_full).epsilon(1e-12));
}

TEST_CASE("proportional fit recovers the generating slope on noise-free data") {
    std::vector<CalibrationPoint> pts;
    for (double r : default_grid()) pts.push_back({r, 1.629 * r});
    const auto m = fit_calibration(pts, CalibrationKind::kProportional);
    CHECK(m.kind == CalibrationKind::kProportional);
    CHECK(m.slope == doctest::Approx(1.629).epsilon(1e-9));
    CHECK(m.intercept == 0.0);
    CHECK(m.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.n_points == pts.size());
}

TEST_CASE("proportional fit on floor-quantized data lands near the generating slope") {
    std::vector<CalibrationPoint> pts;
    for (double r : default_grid()) pts.push_back({r, std::floor(1.169 * r)});
    const auto m = fit_calibration(pts, CalibrationKind::kProportional);
    CHECK(m.slope == doctest::Approx(1.169).epsilon(0.01 / 1.169));
    CHECK(m.r_squared >= 0.999);
}

TEST_CASE("affine fit recovers slope and intercept") {
    std::vector<CalibrationPoint> pts;
    for (double r : default_grid()) pts.push_back({r, 1.4 * r + 25.0});
    const auto m = fit_calibration(pts, CalibrationKind::kAffine);
    CHECK(m.slope == doctest::Approx(1.4).epsilon(1e-9));
    CHECK(m.intercept == doctest::Approx(25.0).epsilon(1e-9));
    CHECK(m.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit error cases") {
    std::vector<CalibrationPoint> none;
    CHECK_THROWS_AS(fit_calibration(none, CalibrationKind::kProportional), FitError);

    std::vector<CalibrationPoint> one = {{100.0, 163.0}};
    CHECK_THROWS_AS(fit_calibration(one, CalibrationKind::kAffine), FitError);
    CHECK_NOTHROW(fit_calibration(one, CalibrationKind::kProportional));

    std::vector<CalibrationPoint> same = {{100.0, 163.0}, {100.0, 164.0}};
    CHECK_THROWS_AS(fit_calibration(same, CalibrationKind::kAffine), FitError);

    std::vector<CalibrationPoint> zeros = {{0.0, 0.0}, {0.0, 0.0}};
    CHECK_THROWS_AS(fit_calibration(zeros, CalibrationKind::kProportional), FitError);
}

TEST_CASE("apply_calibration inverts the fitted response") {
    std::vector<CalibrationPoint> pts;
    for (double r : default_grid()) pts.push_back({r, 1.629 * r});
    const auto m = fit_calibration(pts, CalibrationKind::kProportional);
    CHECK(apply_calibration(m, 1629.0) == doctest::Approx(1000.0).epsilon(1e-4));
    CHECK(apply_calibration(m, 2.0 * 1629.0) ==
          doctest::Approx(2.0 * apply_calibration(m, 1629.0)).epsilon(1e-12));

    CalibrationModel affine{CalibrationKind::kAffine, 1.4, 25.0, 1.0, 2};
    CHECK(apply_calibration(affine, 25.0) == 0.0);
}

TEST_CASE("error metrics basics") {
    std::vector<EstimatePair> exact;
    for (double r : default_grid()) exact.push_back({r, r});
    const auto m = error_metrics(exact);
    for (double e : m.relative_errors) CHECK(e == 0.0);
    CHECK(m.max_abs_relative == 0.0);
    CHECK(m.r_squared == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<EstimatePair> single = {{100.0, 112.0}};
    CHECK(error_metrics(single).relative_errors[0] == doctest::Approx(0.12).epsilon(1e-12));

    std::vector<EstimatePair> empty;
    CHECK_THROWS_AS(error_metrics(empty), std::invalid_argument);
    std::vector<EstimatePair> bad = {{0.0, 1.0}};
    CHECK_THROWS_AS(error_metrics(bad), std::invalid_argument);
}

TEST_CASE("misdeclared capacitance shifts uncalibrated estimates; calibration removes it") {
    // True c_stor produces the counts; the station believes c is 28.2% lower.
    DecodeParams truth;
    DecodeParams wrong = truth;
    wrong.c_stor = truth.c_stor * 0.718;

    std::vector<EstimatePair> uncal, cal;
    std::vector<CalibrationPoint> pts;
    for (double r : default_grid()) {
        const double n = std::floor(model_slope(truth) * r);
        pts.push_back({r, n});
        uncal.push_back({r, n / model_slope(wrong)});
    }
    const auto fit = fit_calibration(pts, CalibrationKind::kProportional);
    for (const auto& pt : pts) cal.push_back({pt.r_true, apply_calibration(fit, pt.n_m)});

    const auto mu = error_metrics(uncal);
    double mean = 0.0;
    for (double e : mu.relative_errors) {
        CHECK(e > 0.37);
        CHECK(e < 0.3931);
        mean += e;
    }
    mean /= static_cast<double>(mu.relative_errors.size());
    CHECK(mean == doctest::Approx(1.0 / 0.718 - 1.0).epsilon(0.02));

    const auto mc = error_metrics(cal);
    CHECK(mc.max_abs_relative < 0.01);
}

TEST_CASE("calibration removes any multiplicative c_stor error to one count") {
    DecodeParams nominal;
    for (double scale : {0.5, 0.718, 0.8, 1.0, 1.25, 2.0}) {
        const double true_slope = model_slope(nominal) * scale;
        std::vector<CalibrationPoint> pts;
        for (double r : default_grid()) pts.push_back({r, std::floor(true_slope * r)});
        const auto fit = fit_calibration(pts, CalibrationKind::kProportional);
        for (const auto& pt : pts) {
            const double r_cal = apply_calibration(fit, pt.n_m);
            CHECK(std::abs(r_cal - pt.r_true) <= 1.0 / fit.slope + 1e-9);
        }
    }
}

TEST_CASE("ingest_log handles the happy path, rejects and deduplicates") {
    std::ostringstream log;
    log << log_line(sample_beacon(0)) << '\n';
    log << log_line(sample_beacon(0)) << '\n';  // duplicate
    auto corrupted = log_line(sample_beacon(1));
    corrupted[0] = corrupted[0] == '0' ? '1' : '0';  // flip a nibble
    log << corrupted << '\n';
    log << "not hex at all\n";
    log << log_line(sample_beacon(2)) << '\n';

    std::istringstream in(log.str());
    DecodeParams p;
    const auto result = ingest_log(in, p);
    CHECK(result.lines_seen == 5);
    CHECK(result.reports.size() == 2);
    CHECK(result.duplicates_dropped == 1);
    CHECK(result.lines_rejected == 2);
    REQUIRE(result.diagnostics.size() == 2);
    CHECK(result.diagnostics[0].line_no == 3);
    CHECK(result.diagnostics[0].message == "bad-crc");
    CHECK(result.diagnostics[1].message == "invalid hex");

    CHECK(result.reports[0].seq == 0);
    CHECK(result.reports[1].seq == 2);
    CHECK(result.reports[0].source == EstimateSource::kModel);
    CHECK(result.reports[0].r_m_est == doctest::Approx(999.78).epsilon(1e-4));
}

TEST_CASE("ingest_log on an empty stream") {
    std::istringstream in("");
    const auto result = ingest_log(in, DecodeParams{});
    CHECK(result.reports.empty());
    CHECK(result.lines_seen == 0);
}

TEST_CASE("in_range reflects the margin condition and r_min") {
    DecodeParams p;
    // Strong margin: 10 uW harvest (n_h = 1953600) at ~1 kohm.
    std::istringstream strong(log_line(sample_beacon(0, 1629, 1953600)));
    const auto a = ingest_log(strong, p);
    REQUIRE(a.reports.size() == 1);
    CHECK(a.reports[0].margin_ratio == doctest::Approx(1083.5).epsilon(2e-3));
    CHECK(a.reports[0].in_range);

    // The 1 mW operating point sits below the default margin of 10.
    std::istringstream weak(log_line(sample_beacon(1, 1629, 14688)));
    const auto b = ingest_log(weak, p);
    REQUIRE(b.reports.size() == 1);
    CHECK(b.reports[0].margin_ratio == doctest::Approx(8.14).epsilon(1e-2));
    CHECK_FALSE(b.reports[0].in_range);

    // Same beacon, relaxed margin.
    std::istringstream weak2(log_line(sample_beacon(1, 1629, 14688)));
    const auto c = ingest_log(weak2, p, nullptr, {5.0});
    CHECK(c.reports[0].in_range);

    // n_m = 0 decodes to 0 ohm, below r_min.
    std::istringstream zero(log_line(sample_beacon(2, 0, 1953600)));
    const auto d = ingest_log(zero, p);
    CHECK_FALSE(d.reports[0].in_range);

    // n_h = 0 gives no usable margin.
    std::istringstream nohm(log_line(sample_beacon(3, 1629, 0)));
    const auto e = ingest_log(nohm, p);
    CHECK(e.reports[0].margin_ratio == 0.0);
    CHECK_FALSE(e.reports[0].in_range);
}

TEST_CASE("dedup window forgets after 128 distinct seqs per node") {
    std::ostringstream log;
    log << log_line(sample_beacon(0)) << '\n';
    for (int s = 1; s <= 128; ++s) log << log_line(sample_beacon(static_cast<std::uint8_t>(s))) << '\n';
    log << log_line(sample_beacon(0)) << '\n';  // evicted by now: accepted again

    std::istringstream in(log.str());
    const auto result = ingest_log(in, DecodeParams{});
    CHECK(result.reports.size() == 130);
    CHECK(result.duplicates_dropped == 0);
}

TEST_CASE("dedup is per node id") {
    auto b0 = sample_beacon(0);
    auto b1 = sample_beacon(0);
    b1.node_id = 2;
    std::ostringstream log;
    log << log_line(b0) << '\n' << log_line(b1) << '\n' << log_line(b0) << '\n';
    std::istringstream in(log.str());
    const auto result = ingest_log(in, DecodeParams{});
    CHECK(result.reports.size() == 2);
    CHECK(result.duplicates_dropped == 1);
}

TEST_CASE("calibrated ingest uses the supplied model") {
    std::vector<CalibrationPoint> pts;
    for (double r : default_grid()) pts.push_back({r, 1.169 * r});
    const auto fit = fit_calibration(pts, CalibrationKind::kProportional);

    std::istringstream in(log_line(sample_beacon(0, 1169, 1953600)));
    const auto result = ingest_log(in, DecodeParams{}, &fit);
    REQUIRE(result.reports.size() == 1);
    CHECK(result.reports[0].source == EstimateSource::kCalibrated);
    CHECK(result.reports[0].r_m_est == doctest::Approx(1000.0).epsilon(1e-6));
}

TEST_CASE("ingest_counts_csv parses the count-level input format") {
    std::istringstream in(
        "node_id,seq,n_m,n_h\n"
        "1,0,1629,1953600\n"
        "1,0,1629,1953600\n"      // duplicate
        "1,1,not-a-number,5\n"    // malformed
        "2,0,3258,1953600\n");
    const auto result = ingest_counts_csv(in, DecodeParams{});
    CHECK(result.reports.size() == 2);
    CHECK(result.duplicates_dropped == 1);
    CHECK(result.lines_rejected == 1);
    CHECK(result.reports[1].node_id == 2);
    CHECK(result.reports[1].r_m_est == doctest::Approx(2.0 * 999.779848779458).epsilon(1e-12));

    std::istringstream missing("seq,n_m\n1,2\n");
    CHECK_THROWS_AS(ingest_counts_csv(missing, DecodeParams{}), std::runtime_error);
}

TEST_CASE("report CSV format") {
    std::istringstream in(log_line(sample_beacon(0)));
    const auto result = ingest_log(in, DecodeParams{});
    std::ostringstream os;
    write_reports_csv(os, result.reports);
    const auto text = os.str();
    CHECK(text.rfind("node_id,seq,n_m,r_est_ohm,in_range,margin_ratio,source\n", 0) == 0);
    CHECK(text.find(",model\n") != std::string::npos);
}

TEST_CASE("calibration file roundtrip") {
    CalibrationModel m{CalibrationKind::kAffine, 1.169, -2.5, 0.9968, 16};
    std::ostringstream os;
    save_calibration(os, m);
    std::istringstream is(os.str());
    const auto back = load_calibration(is);
    CHECK(back.kind == m.kind);
    CHECK(back.slope == m.slope);
    CHECK(back.intercept == m.intercept);
    CHECK(back.r_squared == m.r_squared);
    CHECK(back.n_points == m.n_points);

    std::istringstream junk("kind=proportional\nslope=banana\n");
    CHECK_THROWS_AS(load_calibration(junk), std::runtime_error);
    std::istringstream noslope("kind=proportional\n");
    CHECK_THROWS_AS(load_calibration(noslope), std::runtime_error);
}
