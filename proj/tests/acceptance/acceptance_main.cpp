// Acceptance suite: one line per criterion, nonzero exit when any fails.
//
// Each check pins its tolerances in code; nothing here is calibrated at
// run time. Criteria 1/2 exercise the optimizer against exhaustive
// enumeration, 3 the regressions, 4 the backprop oracle, 5 the full
// learning pipeline, 6 the eta tradeoff, 7 the PTX golden fixtures and
// 8 determinism of simulation and model serialization.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dso/json_io.hpp"
#include "dso/mlp.hpp"
#include "dso/optimizer.hpp"
#include "dso/param_fit.hpp"
#include "dso/ptx_features.hpp"
#include "dso/rng.hpp"
#include "dso/sim_harness.hpp"

using namespace dso;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str());
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct OptimizerRun {
    OptimizationResult analytic;
    OptimizationResult exhaustive;
    KernelModelParams params;
};

std::vector<OptimizerRun> g_runs; // shared between criteria 1 and 2

void criterion_1_optimizer_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    DvfsDomain domain = default_domain(); // 14 core x 3 memory levels
    Rng rng(0xACCE5501ULL);

    int equal = 0;
    int mismatched_without_flag = 0;
    bool never_worse = true;
    for (int i = 0; i < 200; ++i) {
        SyntheticKernel k = gen_kernel(rng.next_u64());
        const double eta = rng.uniform01();
        OptimizerRun run;
        run.params = k.truth;
        run.analytic = optimal_config(k.truth, domain, eta, domain.dev.pmax_w);
        run.exhaustive = brute_force_config(k.truth, domain, eta, domain.dev.pmax_w);
        if (run.analytic.cost > run.exhaustive.cost * (1.0 + 1e-9)) never_worse = false;
        const bool same =
            std::abs(run.analytic.cost - run.exhaustive.cost) <= 1e-9 * run.exhaustive.cost;
        if (same)
            ++equal;
        else if (!run.analytic.fallback)
            ++mismatched_without_flag;
        g_runs.push_back(std::move(run));
    }
    const double secs = seconds_since(t0);

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "optimizer equals oracle %d/200, never worse: %s, unflagged "
                  "mismatches: %d, %.2f s (< 5 s)",
                  equal, never_worse ? "yes" : "no", mismatched_without_flag, secs);
    report(1, never_worse && equal >= 198 && mismatched_without_flag == 0 && secs < 5.0,
           buf);
}

void criterion_2_knee_structure() {
    DvfsDomain domain = default_domain();
    bool identity_ok = true;
    int identity_checked = 0;
    for (const auto& run : g_runs) {
        if (run.analytic.fallback) continue;
        ++identity_checked;
        const double g1_mhz = to_mhz(max_core_freq(run.analytic.presnap_vc, domain.dev),
                                     domain.dev);
        const double knee = run.params.alpha > 0.0
                                ? (run.params.beta / run.params.alpha) *
                                      run.analytic.presnap_fm_mhz
                                : std::numeric_limits<double>::infinity();
        const double expected = std::min(g1_mhz, knee);
        if (std::abs(run.analytic.presnap_fc_mhz - expected) > 1e-9 * expected)
            identity_ok = false;
    }

    // Finite-difference branch checks, 1000 accepted points each.
    Rng rng(0xACCE5502ULL);
    int compute_ok = 0, compute_n = 0;
    while (compute_n < 1000) {
        SyntheticKernel k = gen_kernel(rng.next_u64());
        const double fc = rng.uniform(705.0, 1380.0);
        const double fm = rng.uniform(438.0, 877.0);
        if (!(k.truth.beta / fc > k.truth.alpha / fm)) continue; // need compute-bound
        const double vc = rng.uniform(0.6, 2.0);
        const double eta = rng.uniform(0.05, 1.0);
        ++compute_n;
        DvfsConfig at{vc, fc, fm};
        DvfsConfig up{vc + 1e-5, fc, fm};
        if (cost(k.truth, up, eta, 300.0) > cost(k.truth, at, eta, 300.0)) ++compute_ok;
    }

    int memory_ok = 0, memory_n = 0;
    while (memory_n < 1000) {
        SyntheticKernel k = gen_kernel(rng.next_u64());
        const double fm = rng.uniform(438.0, 877.0);
        const double knee = (k.truth.beta / k.truth.alpha) * fm;
        if (!(knee < 1380.0)) continue;
        const double fc = rng.uniform(knee, 1380.0);
        const double vc = rng.uniform(0.6, 2.0);
        const double eta = rng.uniform01();
        ++memory_n;
        DvfsConfig at{vc, fc, fm};
        DvfsConfig lower{vc, std::max(knee, fc * 0.99), fm};
        if (cost(k.truth, lower, eta, 300.0) <=
            cost(k.truth, at, eta, 300.0) * (1.0 + 1e-12))
            ++memory_ok;
    }

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "pre-snap knee identity on %d results: %s; dC/dV > 0 on %d/1000 "
                  "compute-bound, knee descent safe on %d/1000 memory-bound points",
                  identity_checked, identity_ok ? "ok" : "violated", compute_ok, memory_ok);
    report(2, identity_ok && identity_checked > 0 && compute_ok == 1000 && memory_ok == 1000,
           buf);
}

void criterion_3_regression_recovery() {
    Rng rng(0xACCE5503ULL);

    // Noiseless recovery at 1e-6 relative error.
    bool noiseless_ok = true;
    for (int trial = 0; trial < 25; ++trial) {
        KernelModelParams truth{rng.uniform(5.0, 80.0),    rng.uniform(1.0, 30.0),
                                rng.uniform(0.001, 0.05),  rng.uniform(0.0005, 0.01),
                                rng.uniform(0.05, 0.5),    0.0, 0.0};
        // Both roofline branches must appear: keep alpha/beta within [0.5, 2]
        // of each other on a 4x4 grid.
        truth.beta = rng.uniform(2.0, 20.0);
        truth.alpha = truth.beta * rng.uniform(0.5, 2.0);

        std::vector<PowerSample> ps;
        for (double vc : {0.7, 1.1, 1.9})
            for (double fc : {700.0, 1000.0, 1350.0})
                for (double fm : {450.0, 650.0, 880.0}) {
                    DvfsConfig cfg{vc, fc, fm};
                    ps.push_back({cfg, power(truth, cfg)});
                }
        PowerFit pf = fit_power(ps);
        auto rel = [](double got, double want) {
            return std::abs(got - want) / std::max(std::abs(want), 1e-12);
        };
        if (rel(pf.p0, truth.p0) > 1e-6 || rel(pf.kappa_pow, truth.kappa_pow) > 1e-6 ||
            rel(pf.gamma, truth.gamma) > 1e-6 || rel(pf.c, truth.c) > 1e-6)
            noiseless_ok = false;

        std::vector<TimeSample> ts;
        for (double fc : {1.0, 2.0, 3.0, 4.0})
            for (double fm : {1.0, 2.0, 3.0, 4.0}) {
                DvfsConfig cfg{1.0, fc, fm};
                ts.push_back({cfg, exec_time(truth, cfg)});
            }
        TimeFit tf = fit_time(ts);
        if (rel(tf.t0, truth.t0) > 1e-6 || rel(tf.alpha, truth.alpha) > 1e-6 ||
            rel(tf.beta, truth.beta) > 1e-6)
            noiseless_ok = false;
    }

    // 1% multiplicative noise: mean MAPE over 50 seeds within 2%.
    double power_mape_acc = 0.0, time_mape_acc = 0.0;
    for (int seed = 0; seed < 50; ++seed) {
        Rng nrng(1000 + static_cast<std::uint64_t>(seed));
        KernelModelParams truth{40.0, 12.0, 0.01, 0.004, 0.1, 0.0, 0.0};
        truth.beta = nrng.uniform(4.0, 16.0);
        truth.alpha = truth.beta * nrng.uniform(0.5, 2.0);

        std::vector<PowerSample> ps;
        for (double vc : {0.7, 1.1, 1.9})
            for (double fc : {700.0, 1000.0, 1350.0})
                for (double fm : {450.0, 650.0, 880.0}) {
                    DvfsConfig cfg{vc, fc, fm};
                    ps.push_back({cfg, power(truth, cfg) *
                                           (1.0 + 0.01 * nrng.uniform(-1.0, 1.0))});
                }
        power_mape_acc += fit_power(ps).mape_pct;

        std::vector<TimeSample> ts;
        for (double fc : {1.0, 2.0, 3.0, 4.0})
            for (double fm : {1.0, 2.0, 3.0, 4.0}) {
                DvfsConfig cfg{1.0, fc, fm};
                ts.push_back({cfg, exec_time(truth, cfg) *
                                       (1.0 + 0.01 * nrng.uniform(-1.0, 1.0))});
            }
        time_mape_acc += fit_time(ts).mape_pct;
    }
    const double power_mape = power_mape_acc / 50.0;
    const double time_mape = time_mape_acc / 50.0;

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "noiseless recovery at 1e-6: %s; 1%% noise MAPE power %.3f%%, "
                  "time %.3f%% (<= 2%%)",
                  noiseless_ok ? "ok" : "violated", power_mape, time_mape);
    report(3, noiseless_ok && power_mape <= 2.0 && time_mape <= 2.0, buf);
}

void criterion_4_gradient_check() {
    Eigen::VectorXd x(4);
    x << 0.1, 0.7, 0.3, 0.9;
    Eigen::VectorXd y(2);
    y << 0.4, -0.6;

    double worst = 0.0;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        MlpModel probe = init_mlp({4, 3, 3, 3, 2}, seed);
        worst = std::max(worst, gradient_check(probe, x, y, 1e-5));
    }

    // A deliberately corrupted gradient must fail the same check.
    MlpModel probe = init_mlp({4, 3, 3, 3, 2}, 6);
    Eigen::MatrixXd xm = x, ym = y;
    Gradients analytic = analytic_gradients(probe, xm, ym);
    Gradients numeric = numeric_gradients(probe, xm, ym, 1e-5);
    analytic.weights[2](1, 1) *= 1.10;
    const double corrupted = max_relative_gradient_error(analytic, numeric);

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "backprop vs finite differences: max rel error %.2e (< 1e-6); "
                  "+10%% mutation detected at %.2e (> 1e-6)",
                  worst, corrupted);
    report(4, worst < 1e-6 && corrupted > 1e-6, buf);
}

void criterion_5_pipeline_learning() {
    const auto t0 = std::chrono::steady_clock::now();
    CampaignConfig cfg;
    cfg.seed = 0xACCE5505ULL;
    cfg.etas = {0.8};
    CampaignReport report_data = run_campaign(cfg);
    const double secs = seconds_since(t0);

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "138-train/20-test pipeline: time MAPE %.2f%%, power MAPE %.2f%% "
                  "(<= 10%%), %.1f s (< 120 s)",
                  report_data.time_mape_pct, report_data.power_mape_pct, secs);
    report(5, report_data.time_mape_pct <= 10.0 && report_data.power_mape_pct <= 10.0 &&
                  secs < 120.0,
           buf);
}

void criterion_6_eta_tradeoff() {
    auto sweep_is_monotone = [](const CampaignReport& rep) {
        for (std::size_t i = 1; i < rep.rows.size(); ++i) {
            if (rep.rows[i].mean_energy_saving_pct <
                rep.rows[i - 1].mean_energy_saving_pct - 1e-9)
                return false;
            if (rep.rows[i].mean_time_loss_pct <
                rep.rows[i - 1].mean_time_loss_pct - 1e-9)
                return false;
        }
        return true;
    };

    CampaignConfig cfg;
    cfg.seed = 0xACCE5506ULL;
    cfg.etas = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

    // The savings/loss thresholds at eta = 0.8 are judged with the oracle
    // predictor, isolating the optimizer from prediction error; the trend
    // and the eta = 0 clause must hold on the learned-predictor path too.
    cfg.oracle_predictor = true;
    CampaignReport oracle_rep = run_campaign(cfg);
    cfg.oracle_predictor = false;
    CampaignReport mlp_rep = run_campaign(cfg);

    const bool monotone = sweep_is_monotone(oracle_rep) && sweep_is_monotone(mlp_rep);
    const double loss_at_zero = std::max(oracle_rep.rows.front().mean_time_loss_pct,
                                         mlp_rep.rows.front().mean_time_loss_pct);
    const CampaignEtaRow* at_08 = nullptr;
    for (const auto& row : oracle_rep.rows)
        if (row.eta == 0.8) at_08 = &row;

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "monotone sweep (oracle and learned): %s; loss(eta=0) %.3f%% "
                  "(<= 0.5%%); oracle eta=0.8 saves %.1f%% (> 0) at %.2f%% loss (<= 5%%)",
                  monotone ? "yes" : "no", loss_at_zero, at_08->mean_energy_saving_pct,
                  at_08->mean_time_loss_pct);
    report(6, monotone && loss_at_zero <= 0.5 && at_08 &&
                  at_08->mean_energy_saving_pct > 0.0 && at_08->mean_time_loss_pct <= 5.0,
           buf);
}

std::string fixture_text(const std::string& name) {
    std::ifstream in(std::string(DSO_FIXTURE_DIR) + "/" + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_7_ptx_golden() {
    using Tally = std::map<std::string, std::uint64_t>;
    struct Golden {
        std::string file;
        std::size_t kernel_count;
        std::size_t kernel_index;
        Tally instr, dtype, memspace;
    };
    const std::vector<Golden> goldens = {
        {"saxpy_basic.ptx", 1, 0,
         {{"ld", 2}, {"cvta", 1}, {"fma", 1}, {"st", 1}, {"ret", 1}},
         {{".u64", 2}, {".f32", 3}},
         {{".param", 1}, {".global", 3}}},
        {"predicated.ptx", 1, 0,
         {{"ld", 2}, {"setp", 1}, {"bra", 2}, {"st", 2}, {"mov", 1}, {"ret", 1}},
         {{".u64", 1}, {".f32", 5}},
         {{".param", 1}, {".global", 3}}},
        {"vector_memory.ptx", 1, 0,
         {{"ld", 6}, {"st", 3}, {"bar", 1}, {"ret", 1}},
         {{".u64", 2}, {".f32", 4}, {".f64", 3}},
         {{".param", 2}, {".global", 3}, {".shared", 4}}},
        {"multi_kernel.ptx", 3, 0,
         {{"add", 1}, {"cvt", 1}, {"atom", 1}, {"exit", 1}},
         {{".s32", 2}, {".f32", 2}},
         {{".global", 1}}},
        {"exotic_ops.ptx", 1, 0,
         {{"ld", 2}, {"other", 3}, {"cvt", 1}, {"mbarrier", 1}, {"ret", 1}},
         {{".u64", 1}, {".f32", 2}, {"other", 1}, {".u32", 1}, {".b64", 1}},
         {{".param", 1}, {"other", 1}}},
    };

    bool all_ok = true;
    std::string detail;
    for (const auto& g : goldens) {
        auto kernels = parse_ptx(fixture_text(g.file));
        if (kernels.size() != g.kernel_count) {
            all_ok = false;
            detail += g.file + " kernel count; ";
            continue;
        }
        const auto& k = kernels[g.kernel_index];
        if (k.instr_counts != g.instr || k.dtype_counts != g.dtype ||
            k.memspace_counts != g.memspace) {
            all_ok = false;
            detail += g.file + " tallies; ";
        }
        PtxFeatureVector v = featurize(k);
        for (double s : {v.instr.sum(), v.dtype.sum(), v.memspace.sum()}) {
            if (!(std::abs(s) <= 1e-12 || std::abs(s - 1.0) <= 1e-12)) {
                all_ok = false;
                detail += g.file + " normalization; ";
            }
        }
    }

    report(7, all_ok,
           all_ok ? "5 hand-tallied fixtures parse exactly; category sums in {0, 1}"
                  : "golden mismatch: " + detail);
}

void criterion_8_determinism() {
    // simulate twice with a fixed seed through the full MLP path.
    CampaignConfig cfg;
    cfg.corpus_size = 12;
    cfg.test_size = 3;
    cfg.etas = {0.8};
    cfg.seed = 0xACCE5508ULL;
    cfg.train_epochs = 60;
    cfg.train_grid = {{0.3, 8}};
    const std::string a = to_json(run_campaign(cfg)).dump(2);
    const std::string b = to_json(run_campaign(cfg)).dump(2);

    // Model serialization round-trips bit-exactly.
    MlpModel model = init_mlp(default_layer_sizes(), 0xACCE5509ULL);
    model.target_mean = Eigen::VectorXd::LinSpaced(kParamCount, -2.0, 3.0);
    model.target_std = Eigen::VectorXd::LinSpaced(kParamCount, 0.5, 4.0);
    const std::string m1 = to_json(model).dump();
    const std::string m2 = to_json(model_from_json(parse_json(m1, "model"))).dump();

    const bool sim_ok = a == b;
    const bool model_ok = m1 == m2;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "simulate byte-identical across runs: %s; model JSON round-trip "
                  "bit-exact: %s",
                  sim_ok ? "yes" : "no", model_ok ? "yes" : "no");
    report(8, sim_ok && model_ok, buf);
}

} // namespace

int main() {
    criterion_1_optimizer_oracle();
    criterion_2_knee_structure();
    criterion_3_regression_recovery();
    criterion_4_gradient_check();
    criterion_5_pipeline_learning();
    criterion_6_eta_tradeoff();
    criterion_7_ptx_golden();
    criterion_8_determinism();
    if (g_failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", g_failures);
    return g_failures;
}
