#include "dso/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dso/error.hpp"
#include "dso/param_fit.hpp"

namespace dso {

namespace {

// Generator ranges. The feature map below normalizes each parameter over
// [lo*(1-jitter), hi*(1+jitter)] of its range so no encoding ever clips;
// that keeps the parameter -> feature map injective over the whole corpus.
struct Range {
    double lo, hi, jitter;
    double floor_val() const { return lo * (1.0 - jitter); }
    double span() const { return hi * (1.0 + jitter) - floor_val(); }
    double encode(double v) const { return (v - floor_val()) / span(); }
};

constexpr Range kAlphaRange{40.0, 400.0, 0.10};  // s*MHz, scales with (1 - rho)
constexpr Range kBetaRange{40.0, 400.0, 0.10};   // s*MHz, scales with rho
constexpr Range kT0Range{0.04, 0.30, 0.05};      // s
constexpr Range kGammaRange{0.004, 0.020, 0.10}; // W/MHz, scales with (1 - rho)
constexpr Range kCRange{0.002, 0.0055, 0.10};    // W/(V^2*MHz), scales with rho
constexpr Range kP0Range{40.0, 90.0, 0.05};      // W
constexpr Range kKappaRange{5.0, 15.0, 0.05};    // W/V

double lerp(const Range& r, double w) { return r.lo + (r.hi - r.lo) * w; }

double jittered(const Range& r, double w, Rng& rng) {
    return lerp(r, w) * (1.0 + r.jitter * rng.uniform(-1.0, 1.0));
}

// Deterministic feature map from the final parameter values. Each DCGM
// metric encodes one parameter on a disjoint band of [0, 1]; the PTX
// blocks shift mass between arithmetic and load/store opcodes with the
// compute share. The map is injective, so the learning task is realizable.
FusedFeatures features_from(const KernelModelParams& p) {
    const double za = kAlphaRange.encode(p.alpha);
    const double zb = kBetaRange.encode(p.beta);
    const double zt = kT0Range.encode(p.t0);
    const double zg = kGammaRange.encode(p.gamma);
    const double zc = kCRange.encode(p.c);
    const double zp = kP0Range.encode(p.p0);
    const double zk = kKappaRange.encode(p.kappa_pow);

    FusedFeatures f;
    f.dcgm.smact = 0.30 + 0.65 * zt;
    f.dcgm.smocc = 0.10 + 0.80 * zp;
    f.dcgm.tenso = 0.02 + 0.60 * zg;
    f.dcgm.drama = 0.05 + 0.90 * za;
    f.dcgm.fp64a = 0.02 + 0.70 * zk;
    f.dcgm.fp32a = 0.05 + 0.90 * zb;
    f.dcgm.fp16a = 0.02 + 0.90 * zc;
    f.dcgm.intac = 0.05 + 0.45 * zb + 0.45 * zc;

    // Compute share of the instruction mix.
    const double s = p.beta / (p.alpha + p.beta);

    KernelInstructionCounts counts; // reuse canonical ordering via featurize
    const double arith = 0.70 * s;
    const double mem = 0.70 * (1.0 - s);
    auto slot = [](double weight) {
        return static_cast<std::uint64_t>(std::llround(weight * 1e6));
    };
    counts.instr_counts["add"] = slot(0.35 * arith);
    counts.instr_counts["mul"] = slot(0.25 * arith);
    counts.instr_counts["fma"] = slot(0.40 * arith);
    counts.instr_counts["ld"] = slot(0.60 * mem);
    counts.instr_counts["st"] = slot(0.40 * mem);
    counts.instr_counts["mov"] = slot(0.12);
    counts.instr_counts["setp"] = slot(0.06);
    counts.instr_counts["bra"] = slot(0.06);
    counts.instr_counts["cvt"] = slot(0.03);
    counts.instr_counts["bar"] = slot(0.02);
    counts.instr_counts["ret"] = slot(0.01);

    counts.dtype_counts[".f32"] = slot(0.35 + 0.25 * s);
    counts.dtype_counts[".s32"] = slot(0.30 - 0.15 * s);
    counts.dtype_counts[".u32"] = slot(0.10);
    counts.dtype_counts[".b32"] = slot(0.05);
    counts.dtype_counts[".f64"] = slot(0.08 - 0.05 * s);
    counts.dtype_counts[".u64"] = slot(0.07);
    counts.dtype_counts[".b64"] = slot(0.05 - 0.05 * s);

    counts.memspace_counts[".global"] = slot(0.50 - 0.25 * s);
    counts.memspace_counts[".shared"] = slot(0.12 + 0.10 * s);
    counts.memspace_counts[".param"] = slot(0.08);
    counts.memspace_counts[".reg"] = slot(0.20 + 0.15 * s);
    counts.memspace_counts[".local"] = slot(0.05);
    counts.memspace_counts[".const"] = slot(0.05);

    f.ptx = featurize(counts);
    return f;
}

} // namespace

DeviceConstants default_device() {
    return DeviceConstants{/*kappa_vf=*/0.5, /*pmax_w=*/300.0, /*vmin_v=*/0.55,
                           /*vmax_v=*/2.10, /*mhz_per_unit=*/1000.0};
}

DvfsDomain default_domain() {
    DvfsDomain domain;
    for (int k = 0; k < 13; ++k) domain.core_freqs_mhz.push_back(705.0 + 52.0 * k);
    domain.core_freqs_mhz.push_back(1380.0);
    domain.mem_freqs_mhz = {438.0, 658.0, 877.0};
    domain.dev = default_device();
    validate(domain);
    return domain;
}

SyntheticKernel gen_kernel(std::uint64_t seed) {
    Rng rng(seed);
    const double rho = rng.uniform01();
    return gen_kernel(seed, rho);
}

SyntheticKernel gen_kernel(std::uint64_t seed, double rho) {
    if (!(rho >= 0.0 && rho <= 1.0))
        throw Error(ErrorKind::InvalidArgument, "rho must lie in [0, 1]");
    Rng rng = Rng(seed).fork(0x6e6b);

    KernelModelParams p{};
    p.alpha = jittered(kAlphaRange, 1.0 - rho, rng);
    p.beta = jittered(kBetaRange, rho, rng);
    p.t0 = jittered(kT0Range, rng.uniform01(), rng);
    p.gamma = jittered(kGammaRange, 1.0 - rho, rng);
    p.c = jittered(kCRange, rho, rng);
    p.p0 = jittered(kP0Range, rng.uniform01(), rng);
    p.kappa_pow = jittered(kKappaRange, rng.uniform01(), rng);
    validate(p);

    SyntheticKernel k;
    k.name = "synthetic_" + std::to_string(seed);
    k.truth = p;
    k.features = features_from(p);
    return k;
}

std::pair<double, double> measure(const SyntheticKernel& kernel, const DvfsConfig& cfg,
                                  double noise_level, Rng& rng) {
    if (noise_level < 0.0)
        throw Error(ErrorKind::InvalidArgument, "noise_level must be nonnegative");
    const double t = exec_time(kernel.truth, cfg) *
                     (1.0 + noise_level * rng.uniform(-1.0, 1.0));
    const double w = power(kernel.truth, cfg) *
                     (1.0 + noise_level * rng.uniform(-1.0, 1.0));
    return {t, w};
}

MeasurementSweep measure_sweep(const SyntheticKernel& kernel, const DvfsDomain& domain,
                               double noise_level, Rng& rng) {
    MeasurementSweep sweep;
    for (double fc : domain.core_freqs_mhz) {
        for (double fm : domain.mem_freqs_mhz) {
            DvfsConfig point{required_voltage_mhz(fc, domain.dev), fc, fm};
            auto [t, w] = measure(kernel, point, noise_level, rng);
            sweep.power.push_back({point, w});
            sweep.time.push_back({point, t});
        }
    }
    return sweep;
}

namespace {

void append_csv_number(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

} // namespace

std::string power_samples_csv(const std::vector<PowerSample>& samples) {
    std::string out = "vc,fc_mhz,fm_mhz,power_w\n";
    for (const auto& s : samples) {
        append_csv_number(out, s.cfg.vc);
        out += ',';
        append_csv_number(out, s.cfg.fc_mhz);
        out += ',';
        append_csv_number(out, s.cfg.fm_mhz);
        out += ',';
        append_csv_number(out, s.power_w);
        out += '\n';
    }
    return out;
}

std::string time_samples_csv(const std::vector<TimeSample>& samples) {
    std::string out = "vc,fc_mhz,fm_mhz,time_s\n";
    for (const auto& s : samples) {
        append_csv_number(out, s.cfg.vc);
        out += ',';
        append_csv_number(out, s.cfg.fc_mhz);
        out += ',';
        append_csv_number(out, s.cfg.fm_mhz);
        out += ',';
        append_csv_number(out, s.time_s);
        out += '\n';
    }
    return out;
}

std::string simulate_dcgm_trace(const SyntheticKernel& kernel, int rows,
                                double noise_level, Rng& rng) {
    if (rows < 1) throw Error(ErrorKind::InvalidArgument, "need at least one row");
    if (noise_level < 0.0)
        throw Error(ErrorKind::InvalidArgument, "noise_level must be nonnegative");
    const Eigen::Matrix<double, 8, 1> base = kernel.features.dcgm.as_vector();
    std::string out = "timestamp,SMACT,SMOCC,TENSO,DRAMA,FP64A,FP32A,FP16A,INTAC\n";
    for (int r = 0; r < rows; ++r) {
        append_csv_number(out, static_cast<double>(r));
        for (int m = 0; m < 8; ++m) {
            double v = base[m] * (1.0 + noise_level * rng.uniform(-1.0, 1.0));
            v = std::min(std::max(v, 0.0), 1.0);
            out += ',';
            append_csv_number(out, v);
        }
        out += '\n';
    }
    return out;
}

CampaignReport run_campaign(const CampaignConfig& cfg) {
    validate(cfg.domain);
    if (cfg.corpus_size < 3 && !cfg.oracle_predictor)
        throw Error(ErrorKind::DatasetTooSmall, "corpus too small to train on");
    if (cfg.test_size < 1)
        throw Error(ErrorKind::InvalidArgument, "need at least one test kernel");

    Rng root(cfg.seed);

    std::vector<SyntheticKernel> train_kernels, test_kernels;
    for (int i = 0; i < cfg.corpus_size; ++i)
        train_kernels.push_back(gen_kernel(root.fork(static_cast<std::uint64_t>(i)).next_u64()));
    for (int i = 0; i < cfg.test_size; ++i)
        test_kernels.push_back(
            gen_kernel(root.fork(0x7e57000ULL + static_cast<std::uint64_t>(i)).next_u64()));

    const DeviceConstants& dev = cfg.domain.dev;
    CampaignReport report;
    report.seed = cfg.seed;
    report.corpus_size = cfg.corpus_size;
    report.test_size = cfg.test_size;
    report.noise_level = cfg.noise_level;
    report.oracle_predictor = cfg.oracle_predictor;

    // Predicted parameters per test kernel.
    std::vector<KernelModelParams> predicted;
    if (cfg.oracle_predictor) {
        for (const auto& k : test_kernels) predicted.push_back(k.truth);
    } else {
        // Measure each training kernel across the whole grid and recover
        // its parameters by regression; those fits are the MLP targets.
        std::vector<TrainingExample> dataset;
        for (std::size_t i = 0; i < train_kernels.size(); ++i) {
            const auto& kernel = train_kernels[i];
            Rng mrng = root.fork(0x3ea50000ULL + i);
            try {
                MeasurementSweep sweep =
                    measure_sweep(kernel, cfg.domain, cfg.noise_level, mrng);
                PowerFit pf = fit_power(sweep.power);
                TimeFit tf = fit_time(sweep.time);
                KernelModelParams fitted{pf.p0, pf.kappa_pow, pf.gamma, pf.c,
                                         tf.t0, tf.alpha,     tf.beta};
                dataset.push_back(make_example(kernel.features, fitted));
            } catch (const Error& e) {
                throw Error(e.kind(), kernel.name + ": " + e.message());
            }
        }

        TrainConfig tc;
        tc.epochs = cfg.train_epochs;
        tc.seed = root.fork(0x7a17).next_u64();
        tc.grid = cfg.train_grid;
        TrainResult trained = train(dataset, tc);
        report.selected_cell = trained.cv.best;

        for (const auto& k : test_kernels)
            predicted.push_back(predict_params(trained.model, k.features).params);
    }

    // Prediction quality across the grid, against ground truth.
    {
        double time_acc = 0.0, power_acc = 0.0;
        std::size_t terms = 0;
        for (std::size_t i = 0; i < test_kernels.size(); ++i) {
            for (double fc : cfg.domain.core_freqs_mhz) {
                for (double fm : cfg.domain.mem_freqs_mhz) {
                    DvfsConfig point{required_voltage_mhz(fc, dev), fc, fm};
                    const auto& truth = test_kernels[i].truth;
                    time_acc += std::abs(exec_time(predicted[i], point) -
                                         exec_time(truth, point)) /
                                exec_time(truth, point);
                    power_acc +=
                        std::abs(power(predicted[i], point) - power(truth, point)) /
                        power(truth, point);
                    ++terms;
                }
            }
        }
        report.time_mape_pct = 100.0 * time_acc / static_cast<double>(terms);
        report.power_mape_pct = 100.0 * power_acc / static_cast<double>(terms);
    }

    // Default setting: everything at maximum frequency.
    const double fc_default = cfg.domain.core_freqs_mhz.back();
    const double fm_default = cfg.domain.mem_freqs_mhz.back();
    const DvfsConfig default_cfg{required_voltage_mhz(fc_default, dev), fc_default,
                                 fm_default};

    for (double eta : cfg.etas) {
        CampaignEtaRow row;
        row.eta = eta;
        double savings_acc = 0.0, loss_acc = 0.0;
        for (std::size_t i = 0; i < test_kernels.size(); ++i) {
            const auto& truth = test_kernels[i].truth;
            OptimizationResult opt =
                optimal_config(predicted[i], cfg.domain, eta, dev.pmax_w);

            const double e_def = energy(truth, default_cfg);
            const double t_def = exec_time(truth, default_cfg);
            const double e_opt = energy(truth, opt.best);
            const double t_opt = exec_time(truth, opt.best);

            CampaignApp app;
            app.name = test_kernels[i].name;
            app.default_cfg = default_cfg;
            app.optimized_cfg = opt.best;
            app.energy_saving_pct = 100.0 * (e_def - e_opt) / e_def;
            app.time_loss_pct = 100.0 * (t_opt - t_def) / t_def;
            savings_acc += app.energy_saving_pct;
            loss_acc += app.time_loss_pct;
            row.apps.push_back(std::move(app));
        }
        row.mean_energy_saving_pct = savings_acc / static_cast<double>(test_kernels.size());
        row.mean_time_loss_pct = loss_acc / static_cast<double>(test_kernels.size());
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace dso
