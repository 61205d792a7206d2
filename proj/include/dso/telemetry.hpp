#pragma once

#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace dso {

// The eight DCGM utilization ratios, each averaged over a recorded trace.
// All fields live in [0, 1].
struct DcgmMetricVector {
    double smact = 0.0; // cycles with at least one warp resident on an SM
    double smocc = 0.0; // warp occupancy
    double tenso = 0.0; // tensor pipe activity
    double drama = 0.0; // device memory interface activity
    double fp64a = 0.0; // fp64 pipe activity
    double fp32a = 0.0; // fp32 pipe activity
    double fp16a = 0.0; // fp16 pipe activity
    double intac = 0.0; // integer pipe activity

    Eigen::Matrix<double, 8, 1> as_vector() const {
        Eigen::Matrix<double, 8, 1> v;
        v << smact, smocc, tenso, drama, fp64a, fp32a, fp16a, intac;
        return v;
    }
};

// A recorded power trace and its mean, the regression target for the
// power model.
struct PowerTrace {
    std::vector<std::pair<double, double>> samples; // (timestamp s, power W)
    double average_power = 0.0;                     // arithmetic mean [W]
};

// CSV header: timestamp,SMACT,SMOCC,TENSO,DRAMA,FP64A,FP32A,FP16A,INTAC
// Values averaged per column. Throws SchemaMismatch / EmptyTrace /
// OutOfRange (with the offending row number).
DcgmMetricVector load_dcgm_samples(std::string_view csv_text);

// CSV header: timestamp,power_w. Throws SchemaMismatch / EmptyTrace /
// NonPositivePower.
PowerTrace load_power_samples(std::string_view csv_text);

} // namespace dso
