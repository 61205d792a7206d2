#pragma once

#include <vector>

#include "dso/dvfs_model.hpp"

namespace dso {

// Feasible operating set: discrete clock tables plus the device constants
// that couple core frequency to voltage. Voltage is not independently
// settable; each core frequency induces its voltage through the
// voltage-frequency curve, and domain construction checks that every
// induced voltage lies within [vmin, vmax].
struct DvfsDomain {
    std::vector<double> core_freqs_mhz; // strictly increasing, positive
    std::vector<double> mem_freqs_mhz;  // strictly increasing, positive
    DeviceConstants dev;
};

void validate(const DvfsDomain& domain);

struct OptimizationResult {
    DvfsConfig best{};
    double cost = 0.0;
    double energy_j = 0.0;
    double time_s = 0.0;
    long candidates_evaluated = 0;
    // True when the structured search produced no feasible candidate and
    // the result came from exhaustive enumeration instead.
    bool fallback = false;
    // Continuous optimum at the winning voltage level, before snapping to
    // the discrete tables. Meaningful only when fallback is false; it
    // satisfies fc = min(g1(vc), (beta/alpha)*fm) by construction.
    double presnap_vc = 0.0;
    double presnap_fc_mhz = 0.0;
    double presnap_fm_mhz = 0.0;
};

// Structured search: grid over the induced voltage levels, with core and
// memory frequencies derived per level from the cost structure (core
// frequency maximal for the voltage, capped at the roofline knee; memory
// frequency the smallest keeping the compute branch active), then snapped
// to the tables with both grid neighbors evaluated. Falls back to
// exhaustive enumeration (flagged) if no candidate exists.
OptimizationResult optimal_config(const KernelModelParams& params, const DvfsDomain& domain,
                                  double eta, double pmax_w);

// Exhaustive enumeration over every (fc, fm) pair, the verification oracle.
// Ties break toward lower energy, then lower voltage, then lower memory
// frequency.
OptimizationResult brute_force_config(const KernelModelParams& params,
                                      const DvfsDomain& domain, double eta, double pmax_w);

} // namespace dso
