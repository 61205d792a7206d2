#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "dso/dvfs_model.hpp"

namespace dso {

struct PowerSample {
    DvfsConfig cfg;
    double power_w; // > 0
};

struct TimeSample {
    DvfsConfig cfg;
    double time_s; // > 0
};

// Which roofline branch a time sample was assigned to.
enum class TimeBranch { Memory, Core };

struct PowerFit {
    double p0 = 0.0;
    double kappa_pow = 0.0;
    double gamma = 0.0;
    double c = 0.0;
    double mape_pct = 0.0;         // over the input samples
    bool constraint_active = false; // true when any coefficient was clamped to 0
};

struct TimeFit {
    double t0 = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double mape_pct = 0.0;
    bool constraint_active = false;
    // All samples landed in one branch; the inactive coefficient is set to 0
    // rather than invented.
    bool partial_identifiability = false;
    std::vector<TimeBranch> branch;  // final per-sample assignment
    std::vector<double> rss_trace;   // model residual sum of squares per iteration
    int iterations = 0;
};

// Ordinary least squares of power on [1, vc, fm, vc^2*fc]. Requires >= 4
// samples and a full-rank design; negative coefficients are clamped to zero
// and flagged. Throws Error(RankDeficient) otherwise.
PowerFit fit_power(std::span<const PowerSample> samples);

// Piecewise fit of T = t0 + max(alpha/fm, beta/fc) by alternating branch
// assignment and joint least squares, seeded from two single-branch fits.
// Converges when the assignment is stable, capped at 50 iterations.
// Throws Error(Underdetermined) for fewer than 3 samples.
TimeFit fit_time(std::span<const TimeSample> samples);

// CSV loaders for the sample schemas `vc,fc_mhz,fm_mhz,power_w` and
// `vc,fc_mhz,fm_mhz,time_s`.
std::vector<PowerSample> load_power_samples_csv(std::string_view csv_text);
std::vector<TimeSample> load_time_samples_csv(std::string_view csv_text);

} // namespace dso
