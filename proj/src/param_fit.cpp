#include "dso/param_fit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "dso/error.hpp"

namespace dso {

namespace {

constexpr int kMaxIterations = 50;

double mape_pct_of(const Eigen::VectorXd& predicted, const Eigen::VectorXd& observed) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < observed.size(); ++i)
        acc += std::abs(predicted[i] - observed[i]) / std::abs(observed[i]);
    return 100.0 * acc / static_cast<double>(observed.size());
}

// OLS via column-pivoted QR; throws when the design does not determine all
// columns.
Eigen::VectorXd solve_full_rank(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                std::string_view what, ErrorKind deficient_kind) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < design.cols())
        throw Error(deficient_kind,
                    std::string(what) + ": design matrix rank " +
                        std::to_string(qr.rank()) + " < " +
                        std::to_string(design.cols()) +
                        " (vary the configurations)");
    return qr.solve(y);
}

} // namespace

PowerFit fit_power(std::span<const PowerSample> samples) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    if (n < 4)
        throw Error(ErrorKind::RankDeficient,
                    "fit_power needs at least 4 samples, got " + std::to_string(n));
    for (const auto& s : samples)
        if (!(s.power_w > 0.0))
            throw Error(ErrorKind::InvalidArgument, "power samples must be positive");

    Eigen::MatrixXd design(n, 4);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const DvfsConfig& cfg = samples[static_cast<std::size_t>(i)].cfg;
        design(i, 0) = 1.0;
        design(i, 1) = cfg.vc;
        design(i, 2) = cfg.fm_mhz;
        design(i, 3) = cfg.vc * cfg.vc * cfg.fc_mhz;
        y[i] = samples[static_cast<std::size_t>(i)].power_w;
    }

    Eigen::VectorXd coef = solve_full_rank(design, y, "fit_power", ErrorKind::RankDeficient);

    PowerFit fit;
    for (Eigen::Index j = 0; j < 4; ++j) {
        if (coef[j] < 0.0) {
            coef[j] = 0.0;
            fit.constraint_active = true;
        }
    }
    fit.p0 = coef[0];
    fit.kappa_pow = coef[1];
    fit.gamma = coef[2];
    fit.c = coef[3];
    fit.mape_pct = mape_pct_of(design * coef, y);
    return fit;
}

TimeFit fit_time(std::span<const TimeSample> samples) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    if (n < 3)
        throw Error(ErrorKind::Underdetermined,
                    "fit_time needs at least 3 samples, got " + std::to_string(n));
    for (const auto& s : samples)
        if (!(s.time_s > 0.0))
            throw Error(ErrorKind::InvalidArgument, "time samples must be positive");

    Eigen::VectorXd y(n), inv_fm(n), inv_fc(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        y[i] = s.time_s;
        inv_fm[i] = 1.0 / s.cfg.fm_mhz;
        inv_fc[i] = 1.0 / s.cfg.fc_mhz;
    }

    // Joint solve for a fixed assignment; returns the model residual sum
    // of squares (with full max() semantics) or +inf when unsolvable.
    auto solve_assignment = [&](const std::vector<TimeBranch>& assign, double& t0_out,
                                double& alpha_out, double& beta_out) {
        bool any_mem = false, any_core = false;
        for (auto b : assign) (b == TimeBranch::Memory ? any_mem : any_core) = true;
        const int cols = 1 + (any_mem ? 1 : 0) + (any_core ? 1 : 0);
        Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, cols);
        design.col(0).setOnes();
        const int mem_col = any_mem ? 1 : -1;
        const int core_col = any_core ? (any_mem ? 2 : 1) : -1;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (assign[static_cast<std::size_t>(i)] == TimeBranch::Memory)
                design(i, mem_col) = inv_fm[i];
            else
                design(i, core_col) = inv_fc[i];
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        qr.setThreshold(1e-10);
        if (qr.rank() < cols) return std::numeric_limits<double>::infinity();
        Eigen::VectorXd coef = qr.solve(y);
        t0_out = coef[0];
        alpha_out = any_mem ? std::max(coef[mem_col], 0.0) : 0.0;
        beta_out = any_core ? std::max(coef[core_col], 0.0) : 0.0;
        double rss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pred =
                t0_out + std::max(alpha_out * inv_fm[i], beta_out * inv_fc[i]);
            rss += (pred - y[i]) * (pred - y[i]);
        }
        return rss;
    };

    // Seed: any fitted (alpha, beta) splits the samples along a threshold
    // on fc/fm (memory-bound iff fc/fm >= beta/alpha), so the candidate
    // assignments form a one-dimensional family of at most n+1 splits.
    // Evaluate them all and start the alternation from the best.
    std::vector<double> ratios(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        ratios[static_cast<std::size_t>(i)] = inv_fm[i] / inv_fc[i]; // = fc/fm
    std::vector<double> cuts = ratios;
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    // Single-branch splits go first: when an interior split only ties them
    // (which happens when one branch is unidentifiable), the tie must not
    // invent a coefficient for the unseen branch.
    std::vector<double> ordered;
    ordered.push_back(std::numeric_limits<double>::infinity()); // all-core
    ordered.push_back(cuts.front());                            // all-memory
    for (std::size_t i = 1; i < cuts.size(); ++i) ordered.push_back(cuts[i]);

    std::vector<TimeBranch> branch(static_cast<std::size_t>(n), TimeBranch::Core);
    double best_rss = std::numeric_limits<double>::infinity();
    const double tie_slack = 1e-12 * (y.squaredNorm() + 1.0);
    for (double cut : ordered) {
        std::vector<TimeBranch> assign(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
            assign[static_cast<std::size_t>(i)] =
                ratios[static_cast<std::size_t>(i)] >= cut ? TimeBranch::Memory
                                                           : TimeBranch::Core;
        double t0_c, alpha_c, beta_c;
        const double rss = solve_assignment(assign, t0_c, alpha_c, beta_c);
        if (rss < best_rss - tie_slack) {
            best_rss = rss;
            branch = std::move(assign);
        }
    }
    if (!std::isfinite(best_rss))
        throw Error(ErrorKind::Underdetermined,
                    "fit_time: no branch split yields a solvable design");

    TimeFit fit;
    double t0 = 0.0, alpha = 0.0, beta = 0.0;

    for (int iter = 0; iter < kMaxIterations; ++iter) {
        ++fit.iterations;

        bool any_mem = false, any_core = false;
        for (auto b : branch) (b == TimeBranch::Memory ? any_mem : any_core) = true;

        // Joint least squares with exactly one active regressor per sample.
        // A branch nobody occupies contributes a zero column, so drop it.
        int cols = 1 + (any_mem ? 1 : 0) + (any_core ? 1 : 0);
        Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, cols);
        design.col(0).setOnes();
        const int mem_col = any_mem ? 1 : -1;
        const int core_col = any_core ? (any_mem ? 2 : 1) : -1;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (branch[static_cast<std::size_t>(i)] == TimeBranch::Memory)
                design(i, mem_col) = inv_fm[i];
            else
                design(i, core_col) = inv_fc[i];
        }

        Eigen::VectorXd coef = solve_full_rank(design, y, "fit_time", ErrorKind::Underdetermined);
        t0 = coef[0];
        alpha = any_mem ? coef[mem_col] : 0.0;
        beta = any_core ? coef[core_col] : 0.0;
        fit.constraint_active = false;
        if (alpha < 0.0) {
            alpha = 0.0;
            fit.constraint_active = true;
        }
        if (beta < 0.0) {
            beta = 0.0;
            fit.constraint_active = true;
        }

        double rss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double pred = t0 + std::max(alpha * inv_fm[i], beta * inv_fc[i]);
            rss += (pred - y[i]) * (pred - y[i]);
        }
        fit.rss_trace.push_back(rss);

        // Reassign to the branch the fitted model says is binding.
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            TimeBranch want = alpha * inv_fm[i] >= beta * inv_fc[i] ? TimeBranch::Memory
                                                                    : TimeBranch::Core;
            if (want != branch[static_cast<std::size_t>(i)]) {
                branch[static_cast<std::size_t>(i)] = want;
                changed = true;
            }
        }
        if (!changed) break;
    }

    bool all_mem = true, all_core = true;
    for (auto b : branch) (b == TimeBranch::Memory ? all_core : all_mem) = false;
    fit.partial_identifiability = all_mem || all_core;

    if (t0 < 0.0) {
        t0 = 0.0;
        fit.constraint_active = true;
    }
    // A fit that saw only one branch cannot say anything about the other
    // coefficient; zero it rather than trusting a transient value.
    if (fit.partial_identifiability) {
        bool all_mem_final = true;
        for (auto b : branch)
            if (b == TimeBranch::Core) all_mem_final = false;
        (all_mem_final ? beta : alpha) = 0.0;
    }

    fit.t0 = t0;
    fit.alpha = alpha;
    fit.beta = beta;
    fit.branch = std::move(branch);

    Eigen::VectorXd pred(n);
    for (Eigen::Index i = 0; i < n; ++i)
        pred[i] = fit.t0 + std::max(fit.alpha * inv_fm[i], fit.beta * inv_fc[i]);
    fit.mape_pct = mape_pct_of(pred, y);
    return fit;
}

namespace {

std::vector<std::vector<double>> load_config_csv(std::string_view csv_text,
                                                 std::string_view expected_header) {
    std::vector<std::vector<double>> rows;
    std::size_t pos = 0;
    std::size_t row_no = 0;
    bool saw_header = false;
    while (pos <= csv_text.size()) {
        std::size_t nl = csv_text.find('\n', pos);
        std::string_view line = csv_text.substr(
            pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            if (!saw_header) {
                if (line != expected_header)
                    throw Error(ErrorKind::SchemaMismatch,
                                "expected header '" + std::string(expected_header) + "'");
                saw_header = true;
            } else {
                ++row_no;
                std::vector<double> values;
                std::size_t fpos = 0;
                for (;;) {
                    std::size_t comma = line.find(',', fpos);
                    std::string_view field = line.substr(
                        fpos, comma == std::string_view::npos ? std::string_view::npos
                                                              : comma - fpos);
                    double v = 0.0;
                    auto [ptr, ec] =
                        std::from_chars(field.data(), field.data() + field.size(), v);
                    if (ec != std::errc{} || ptr != field.data() + field.size())
                        throw Error(ErrorKind::SchemaMismatch,
                                    "row " + std::to_string(row_no) +
                                        ": not a number: '" + std::string(field) + "'");
                    values.push_back(v);
                    if (comma == std::string_view::npos) break;
                    fpos = comma + 1;
                }
                if (values.size() != 4)
                    throw Error(ErrorKind::SchemaMismatch,
                                "row " + std::to_string(row_no) + ": expected 4 fields");
                rows.push_back(std::move(values));
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (!saw_header)
        throw Error(ErrorKind::SchemaMismatch,
                    "expected header '" + std::string(expected_header) + "'");
    if (rows.empty()) throw Error(ErrorKind::EmptyTrace, "no data rows");
    return rows;
}

} // namespace

std::vector<PowerSample> load_power_samples_csv(std::string_view csv_text) {
    auto rows = load_config_csv(csv_text, "vc,fc_mhz,fm_mhz,power_w");
    std::vector<PowerSample> samples;
    samples.reserve(rows.size());
    for (const auto& r : rows)
        samples.push_back({DvfsConfig{r[0], r[1], r[2]}, r[3]});
    return samples;
}

std::vector<TimeSample> load_time_samples_csv(std::string_view csv_text) {
    auto rows = load_config_csv(csv_text, "vc,fc_mhz,fm_mhz,time_s");
    std::vector<TimeSample> samples;
    samples.reserve(rows.size());
    for (const auto& r : rows)
        samples.push_back({DvfsConfig{r[0], r[1], r[2]}, r[3]});
    return samples;
}

} // namespace dso
