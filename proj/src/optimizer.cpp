#include "dso/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dso/error.hpp"

namespace dso {

namespace {

// Relative slack for snapping comparisons so exact boundary hits are not
// lost to rounding.
constexpr double kSnapSlack = 1e-12;

struct Candidate {
    DvfsConfig cfg;
    double cost;
    double energy;
    double time;
};

// Deterministic preference order: cost, then energy, then voltage, then
// memory frequency, all ascending.
bool better(const Candidate& a, const Candidate& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.energy != b.energy) return a.energy < b.energy;
    if (a.cfg.vc != b.cfg.vc) return a.cfg.vc < b.cfg.vc;
    return a.cfg.fm_mhz < b.cfg.fm_mhz;
}

Candidate evaluate(const KernelModelParams& params, const DvfsDomain& domain, double fc,
                   double fm, double eta, double pmax_w) {
    DvfsConfig cfg{required_voltage_mhz(fc, domain.dev), fc, fm};
    return Candidate{cfg, cost(params, cfg, eta, pmax_w), energy(params, cfg),
                     exec_time(params, cfg)};
}

// Index of the largest table value <= x (with slack), or -1.
int snap_down(const std::vector<double>& table, double x) {
    int idx = -1;
    for (std::size_t i = 0; i < table.size(); ++i)
        if (table[i] <= x * (1.0 + kSnapSlack)) idx = static_cast<int>(i);
    return idx;
}

// Index of the smallest table value >= x (with slack), or -1.
int snap_up(const std::vector<double>& table, double x) {
    for (std::size_t i = 0; i < table.size(); ++i)
        if (table[i] >= x * (1.0 - kSnapSlack)) return static_cast<int>(i);
    return -1;
}

} // namespace

void validate(const DvfsDomain& domain) {
    validate(domain.dev);
    auto check_table = [](const std::vector<double>& t, const char* name) {
        if (t.empty())
            throw Error(ErrorKind::InvalidArgument,
                        std::string(name) + " frequency table is empty");
        double prev = 0.0;
        for (double f : t) {
            if (!(f > prev))
                throw Error(ErrorKind::InvalidArgument,
                            std::string(name) +
                                " frequencies must be positive and strictly increasing");
            prev = f;
        }
    };
    check_table(domain.core_freqs_mhz, "core");
    check_table(domain.mem_freqs_mhz, "memory");
    for (double fc : domain.core_freqs_mhz) {
        const double norm = to_normalized_freq(fc, domain.dev);
        if (norm < domain.dev.kappa_vf)
            throw Error(ErrorKind::FrequencyBelowKappa,
                        "core frequency " + std::to_string(fc) +
                            " MHz normalizes below kappa_vf");
        const double vc = required_voltage(norm, domain.dev);
        if (vc < domain.dev.vmin_v || vc > domain.dev.vmax_v)
            throw Error(ErrorKind::OutOfRange,
                        "core frequency " + std::to_string(fc) +
                            " MHz induces voltage " + std::to_string(vc) +
                            " V outside [vmin, vmax]");
    }
}

OptimizationResult brute_force_config(const KernelModelParams& params,
                                      const DvfsDomain& domain, double eta,
                                      double pmax_w) {
    validate(params);
    validate(domain);

    bool have_best = false;
    Candidate best{};
    long evaluated = 0;
    for (double fc : domain.core_freqs_mhz) {
        for (double fm : domain.mem_freqs_mhz) {
            Candidate cand = evaluate(params, domain, fc, fm, eta, pmax_w);
            ++evaluated;
            if (!have_best || better(cand, best)) {
                best = cand;
                have_best = true;
            }
        }
    }

    OptimizationResult result;
    result.best = best.cfg;
    result.cost = best.cost;
    result.energy_j = best.energy;
    result.time_s = best.time;
    result.candidates_evaluated = evaluated;
    return result;
}

OptimizationResult optimal_config(const KernelModelParams& params, const DvfsDomain& domain,
                                  double eta, double pmax_w) {
    validate(params);
    validate(domain);
    if (!(eta >= 0.0 && eta <= 1.0))
        throw Error(ErrorKind::EtaOutOfRange, "eta must lie in [0, 1]");

    const auto& cores = domain.core_freqs_mhz;
    const auto& mems = domain.mem_freqs_mhz;
    const double fm_max = mems.back();
    const double fm_min = mems.front();
    const double inf = std::numeric_limits<double>::infinity();

    // Roofline knee: above fc = (beta/alpha)*fm the kernel is memory-bound
    // and raising fc only burns power. alpha = 0 never binds; beta = 0
    // pins the knee at zero, i.e. core frequency has no performance value.
    const double knee_cap = params.alpha > 0.0 ? (params.beta / params.alpha) * fm_max : inf;

    bool have_best = false;
    Candidate best{};
    long evaluated = 0;
    double best_level_vc = 0.0;

    for (double level_fc : cores) {
        // One voltage level per supported core frequency.
        const double vc = required_voltage_mhz(level_fc, domain.dev);
        const double g1_mhz = to_mhz(max_core_freq(vc, domain.dev), domain.dev);

        const double fc_target = std::min(g1_mhz, knee_cap);
        const int fc_base = snap_down(cores, fc_target);
        if (fc_base < 0) continue; // even the lowest core clock is above the cap

        for (int dfc = -1; dfc <= 1; ++dfc) {
            const int fc_idx = fc_base + dfc;
            if (fc_idx < 0 || fc_idx >= static_cast<int>(cores.size())) continue;
            const double fc = cores[static_cast<std::size_t>(fc_idx)];

            // Smallest memory frequency keeping the compute branch active.
            int fm_base;
            if (params.beta > 0.0) {
                fm_base = snap_up(mems, (params.alpha / params.beta) * fc);
                if (fm_base < 0) fm_base = static_cast<int>(mems.size()) - 1;
            } else {
                fm_base = 0;
            }

            for (int dfm = -1; dfm <= 1; ++dfm) {
                const int fm_idx = fm_base + dfm;
                if (fm_idx < 0 || fm_idx >= static_cast<int>(mems.size())) continue;
                Candidate cand = evaluate(params, domain, fc,
                                          mems[static_cast<std::size_t>(fm_idx)], eta,
                                          pmax_w);
                ++evaluated;
                if (!have_best || better(cand, best)) {
                    best = cand;
                    have_best = true;
                    best_level_vc = vc;
                }
            }
        }
    }

    if (!have_best) {
        // No level produced a candidate (knee below the core table).
        OptimizationResult result = brute_force_config(params, domain, eta, pmax_w);
        result.fallback = true;
        return result;
    }

    OptimizationResult result;
    result.best = best.cfg;
    result.cost = best.cost;
    result.energy_j = best.energy;
    result.time_s = best.time;
    result.candidates_evaluated = evaluated;

    // Continuous optimum at the winning voltage level before snapping.
    const double g1_win = to_mhz(max_core_freq(best_level_vc, domain.dev), domain.dev);
    const double fc_cont = std::min(g1_win, knee_cap);
    const double fm_cont =
        params.beta > 0.0 ? std::max(fm_min, (params.alpha / params.beta) * fc_cont)
                          : fm_min;
    result.presnap_vc = best_level_vc;
    result.presnap_fc_mhz = fc_cont;
    result.presnap_fm_mhz = fm_cont;
    return result;
}

} // namespace dso
