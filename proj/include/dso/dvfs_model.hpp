#pragma once

#include <cmath>

#include "dso/error.hpp"

namespace dso {

// One GPU operating point. Voltage in volts, both clocks in MHz.
struct DvfsConfig {
    double vc;     // core supply voltage [V]
    double fc_mhz; // core (SM) frequency [MHz]
    double fm_mhz; // memory frequency [MHz]
};

// The seven per-kernel constants of the analytic power/time model.
//
//   P(vc, fc, fm) = p0 + kappa_pow*vc + gamma*fm + c*vc^2*fc
//   T(fc, fm)     = t0 + max(alpha/fm, beta/fc)
//
// All nonnegative; alpha + beta must be positive or T would ignore both
// clock domains.
struct KernelModelParams {
    double p0;        // static power floor [W]
    double kappa_pow; // voltage-proportional static power [W/V]
    double gamma;     // memory-frequency power sensitivity [W/MHz]
    double c;         // core switching power coefficient [W/(V^2*MHz)]
    double t0;        // frequency-independent execution time [s]
    double alpha;     // memory-bound time scale [s*MHz]
    double beta;      // compute-bound time scale [s*MHz]
};

// Device-wide constants. The voltage/frequency coupling curve works in a
// normalized frequency unit (vc ~ 1 V pairs with fc ~ 1 unit); mhz_per_unit
// is the single documented conversion between that unit and MHz.
struct DeviceConstants {
    double kappa_vf;     // parameter of the voltage-frequency curve [V]
    double pmax_w;       // board power limit used by the cost function [W]
    double vmin_v;       // lowest supported core voltage [V]
    double vmax_v;       // highest supported core voltage [V]
    double mhz_per_unit; // MHz per normalized frequency unit
};

inline void validate(const DvfsConfig& cfg) {
    if (!(cfg.vc > 0.0) || !(cfg.fc_mhz > 0.0) || !(cfg.fm_mhz > 0.0))
        throw Error(ErrorKind::InvalidArgument,
                    "DvfsConfig requires positive voltage and frequencies");
}

inline void validate(const KernelModelParams& p) {
    if (p.p0 < 0.0 || p.kappa_pow < 0.0 || p.gamma < 0.0 || p.c < 0.0 ||
        p.t0 < 0.0 || p.alpha < 0.0 || p.beta < 0.0)
        throw Error(ErrorKind::InvalidArgument,
                    "KernelModelParams must be nonnegative");
    if (!(p.alpha + p.beta > 0.0))
        throw Error(ErrorKind::InvalidArgument,
                    "KernelModelParams requires alpha + beta > 0");
}

inline void validate(const DeviceConstants& dev) {
    if (!(dev.vmin_v > 0.0) || !(dev.vmin_v <= dev.vmax_v))
        throw Error(ErrorKind::InvalidArgument, "voltage bounds require 0 < vmin <= vmax");
    if (!(dev.pmax_w > 0.0))
        throw Error(ErrorKind::InvalidArgument, "pmax must be positive");
    if (!(dev.kappa_vf < dev.vmin_v))
        throw Error(ErrorKind::InvalidArgument,
                    "kappa_vf must lie below vmin so the frequency bound stays real");
    if (!(dev.mhz_per_unit > 0.0))
        throw Error(ErrorKind::InvalidArgument, "mhz_per_unit must be positive");
}

inline double to_normalized_freq(double fc_mhz, const DeviceConstants& dev) {
    return fc_mhz / dev.mhz_per_unit;
}

inline double to_mhz(double fc_normalized, const DeviceConstants& dev) {
    return fc_normalized * dev.mhz_per_unit;
}

// Runtime power draw at an operating point [W].
inline double power(const KernelModelParams& p, const DvfsConfig& cfg) {
    return p.p0 + p.kappa_pow * cfg.vc + p.gamma * cfg.fm_mhz +
           p.c * cfg.vc * cfg.vc * cfg.fc_mhz;
}

// Execution time at an operating point [s]. The max() term is the roofline:
// whichever clock domain is the bottleneck sets the scaling.
inline double exec_time(const KernelModelParams& p, const DvfsConfig& cfg) {
    return p.t0 + std::max(p.alpha / cfg.fm_mhz, p.beta / cfg.fc_mhz);
}

// Energy for one task [J].
inline double energy(const KernelModelParams& p, const DvfsConfig& cfg) {
    return power(p, cfg) * exec_time(p, cfg);
}

// eta-weighted energy/performance objective: (eta*P + (1-eta)*pmax) * T.
// eta = 1 optimizes energy alone, eta = 0 time alone.
inline double cost(const KernelModelParams& p, const DvfsConfig& cfg, double eta,
                   double pmax_w) {
    if (!(eta >= 0.0 && eta <= 1.0))
        throw Error(ErrorKind::EtaOutOfRange, "eta must lie in [0, 1]");
    return (eta * power(p, cfg) + (1.0 - eta) * pmax_w) * exec_time(p, cfg);
}

// Highest core frequency sustainable at voltage vc, in normalized units:
// g1(vc) = sqrt((vc - kappa_vf) / 2) + kappa_vf.
inline double max_core_freq(double vc, const DeviceConstants& dev) {
    if (vc < dev.kappa_vf)
        throw Error(ErrorKind::VoltageBelowKappa,
                    "voltage below kappa_vf has no attainable core frequency");
    return std::sqrt((vc - dev.kappa_vf) / 2.0) + dev.kappa_vf;
}

// Algebraic inverse of max_core_freq: the lowest voltage that sustains a
// normalized core frequency fc.
inline double required_voltage(double fc_normalized, const DeviceConstants& dev) {
    if (fc_normalized < dev.kappa_vf)
        throw Error(ErrorKind::FrequencyBelowKappa,
                    "normalized frequency below kappa_vf is outside the curve");
    double d = fc_normalized - dev.kappa_vf;
    return 2.0 * d * d + dev.kappa_vf;
}

// Induced voltage for a core frequency given in MHz.
inline double required_voltage_mhz(double fc_mhz, const DeviceConstants& dev) {
    return required_voltage(to_normalized_freq(fc_mhz, dev), dev);
}

} // namespace dso
