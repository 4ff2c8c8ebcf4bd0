#pragma once

#include <cstddef>

namespace eawsn::station {

enum class CalibrationKind { kProportional, kAffine };

struct CalibrationModel {
    CalibrationKind kind = CalibrationKind::kProportional;
    double slope = 0.0;      ///< pulses per ohm
    double intercept = 0.0;  ///< pulses; 0 for proportional fits
    double r_squared = 0.0;
    std::size_t n_points = 0;
};

struct CalibrationPoint {
    double r_true;  ///< [ohm]
    double n_m;     ///< pulse count (real-valued to allow synthetic data)
};

} // namespace eawsn::station
