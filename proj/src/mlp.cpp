#include "dso/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dso/error.hpp"
#include "dso/rng.hpp"

namespace dso {

namespace {

constexpr double kMapeDenominatorFloor = 1e-9;
constexpr double kBetaFloor = 1e-12; // keeps alpha + beta > 0 after clamping

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

// Forward pass keeping all layer activations; activations[0] is the input.
std::vector<Eigen::MatrixXd> forward_trace(const MlpModel& model, const Eigen::MatrixXd& x) {
    const std::size_t layers = model.weights.size();
    std::vector<Eigen::MatrixXd> activations(layers + 1);
    activations[0] = x;
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z =
            (model.weights[l] * activations[l]).colwise() + model.biases[l];
        activations[l + 1] = (l + 1 < layers) ? sigmoid(z) : std::move(z);
    }
    return activations;
}

// Sort dataset content-first so training is invariant to input order.
std::vector<TrainingExample> canonicalize(std::vector<TrainingExample> dataset) {
    auto lex_less = [](const TrainingExample& a, const TrainingExample& b) {
        if (a.features.size() != b.features.size())
            return a.features.size() < b.features.size();
        for (Eigen::Index i = 0; i < a.features.size(); ++i)
            if (a.features[i] != b.features[i]) return a.features[i] < b.features[i];
        if (a.targets.size() != b.targets.size())
            return a.targets.size() < b.targets.size();
        for (Eigen::Index i = 0; i < a.targets.size(); ++i)
            if (a.targets[i] != b.targets[i]) return a.targets[i] < b.targets[i];
        return false;
    };
    std::sort(dataset.begin(), dataset.end(), lex_less);
    return dataset;
}

struct Standardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    std::vector<int> degenerate; // dims whose variance was zero
};

Standardization target_stats(const std::vector<TrainingExample>& dataset) {
    const auto dim = dataset.front().targets.size();
    Standardization s;
    s.mean = Eigen::VectorXd::Zero(dim);
    for (const auto& ex : dataset) s.mean += ex.targets;
    s.mean /= static_cast<double>(dataset.size());

    Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
    for (const auto& ex : dataset) var += (ex.targets - s.mean).cwiseAbs2();
    var /= static_cast<double>(dataset.size());

    s.std = var.cwiseSqrt();
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (s.std[i] == 0.0) {
            // Zero-variance target: leave the dimension unscaled and
            // centered at zero rather than dividing by nothing.
            s.std[i] = 1.0;
            s.mean[i] = 0.0;
            s.degenerate.push_back(static_cast<int>(i));
        }
    }
    return s;
}

// One SGD pass over the dataset in a seeded shuffled order. Returns the
// epoch's mean loss (computed batch-wise before each update), or NaN on
// numeric blow-up.
double sgd_epoch(MlpModel& model, const std::vector<TrainingExample>& dataset,
                 const Standardization& stats, double lr, int batch_size, Rng& rng) {
    const std::size_t n = dataset.size();
    const auto order = shuffled_indices(n, rng);
    const auto in_dim = dataset.front().features.size();
    const auto out_dim = dataset.front().targets.size();

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t b = std::min(static_cast<std::size_t>(batch_size), n - start);
        Eigen::MatrixXd x(in_dim, b), y(out_dim, b);
        for (std::size_t k = 0; k < b; ++k) {
            const auto& ex = dataset[order[start + k]];
            x.col(static_cast<Eigen::Index>(k)) = ex.features;
            y.col(static_cast<Eigen::Index>(k)) =
                (ex.targets - stats.mean).cwiseQuotient(stats.std);
        }
        Gradients g = analytic_gradients(model, x, y);
        loss_sum += mse_loss(model, x, y);
        ++batches;
        for (std::size_t l = 0; l < model.weights.size(); ++l) {
            model.weights[l] -= lr * g.weights[l];
            model.biases[l] -= lr * g.biases[l];
        }
    }
    double mean_loss = loss_sum / static_cast<double>(batches);
    return std::isfinite(mean_loss) ? mean_loss : std::numeric_limits<double>::quiet_NaN();
}

// Train a fresh model on `dataset`; a NaN tail in the trace means the run
// diverged and stopped early.
MlpModel fit_model(const std::vector<TrainingExample>& dataset,
                   const std::vector<int>& layer_sizes, const Standardization& stats,
                   double lr, int batch_size, int epochs, std::uint64_t seed,
                   std::vector<double>* loss_trace) {
    MlpModel model = init_mlp(layer_sizes, seed);
    model.target_mean = stats.mean;
    model.target_std = stats.std;
    Rng rng = Rng(seed).fork(0x5d0ULL);
    for (int e = 0; e < epochs; ++e) {
        double loss = sgd_epoch(model, dataset, stats, lr, batch_size, rng);
        if (loss_trace) loss_trace->push_back(loss);
        if (std::isnan(loss)) break; // diverged; caller screens via the trace
    }
    return model;
}

double prediction_mape_pct(const MlpModel& model,
                           const std::vector<TrainingExample>& examples) {
    double acc = 0.0;
    std::size_t terms = 0;
    for (const auto& ex : examples) {
        Eigen::VectorXd pred = forward_raw(model, ex.features);
        if (!pred.allFinite()) return std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < pred.size(); ++i) {
            acc += std::abs(pred[i] - ex.targets[i]) /
                   std::max(std::abs(ex.targets[i]), kMapeDenominatorFloor);
            ++terms;
        }
    }
    return 100.0 * acc / static_cast<double>(terms);
}

std::vector<int> layer_sizes_for(const std::vector<TrainingExample>& dataset,
                                 const TrainConfig& cfg) {
    std::vector<int> sizes = cfg.layer_sizes.empty() ? default_layer_sizes() : cfg.layer_sizes;
    sizes.front() = static_cast<int>(dataset.front().features.size());
    sizes.back() = static_cast<int>(dataset.front().targets.size());
    return sizes;
}

} // namespace

Eigen::VectorXd FusedFeatures::as_vector() const {
    Eigen::VectorXd v(kFusedFeatureCount);
    v.segment(0, 8) = dcgm.as_vector();
    v.segment(8, 101) = ptx.instr;
    v.segment(109, 17) = ptx.dtype;
    v.segment(126, 8) = ptx.memspace;
    return v;
}

Eigen::VectorXd params_to_vector(const KernelModelParams& p) {
    Eigen::VectorXd v(kParamCount);
    v << p.p0, p.kappa_pow, p.gamma, p.c, p.t0, p.alpha, p.beta;
    return v;
}

KernelModelParams vector_to_params(const Eigen::VectorXd& v) {
    return KernelModelParams{v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

std::vector<int> default_layer_sizes() { return {kFusedFeatureCount, 100, 50, 25, kParamCount}; }

std::vector<GridCell> default_grid() {
    return {{0.3, 8},  {0.3, 16},  {0.3, 32},  {0.1, 8},  {0.1, 16},  {0.1, 32},
            {0.03, 8}, {0.03, 16}, {0.03, 32}, {0.01, 8}, {0.01, 16}, {0.01, 32}};
}

MlpModel init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw Error(ErrorKind::InvalidModel, "need at least input and output layers");
    for (int s : layer_sizes)
        if (s <= 0) throw Error(ErrorKind::InvalidModel, "layer sizes must be positive");

    MlpModel model;
    model.layer_sizes = layer_sizes;
    model.seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
        model.weights.push_back(std::move(w));
        model.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    model.target_mean = Eigen::VectorXd::Zero(layer_sizes.back());
    model.target_std = Eigen::VectorXd::Ones(layer_sizes.back());
    return model;
}

void validate(const MlpModel& model) {
    if (model.layer_sizes.size() < 2 ||
        model.weights.size() != model.layer_sizes.size() - 1 ||
        model.biases.size() != model.weights.size())
        throw Error(ErrorKind::InvalidModel, "layer bookkeeping is inconsistent");
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        if (model.weights[l].rows() != model.layer_sizes[l + 1] ||
            model.weights[l].cols() != model.layer_sizes[l] ||
            model.biases[l].size() != model.layer_sizes[l + 1])
            throw Error(ErrorKind::InvalidModel, "weight shapes do not chain");
    }
    const auto out = model.layer_sizes.back();
    if (model.target_mean.size() != out || model.target_std.size() != out)
        throw Error(ErrorKind::InvalidModel, "normalization stats do not match output");
    for (Eigen::Index i = 0; i < model.target_std.size(); ++i)
        if (!(model.target_std[i] > 0.0))
            throw Error(ErrorKind::InvalidModel, "target std must be positive");
}

Eigen::VectorXd forward_standardized(const MlpModel& model, const Eigen::VectorXd& x) {
    return forward_trace(model, x).back();
}

Eigen::VectorXd forward_raw(const MlpModel& model, const Eigen::VectorXd& x) {
    Eigen::VectorXd std_out = forward_standardized(model, x);
    return (std_out.cwiseProduct(model.target_std)) + model.target_mean;
}

ParamPrediction predict_params(const MlpModel& model, const FusedFeatures& features) {
    Eigen::VectorXd raw = forward_raw(model, features.as_vector());

    ParamPrediction out;
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        if (raw[i] < 0.0) {
            raw[i] = 0.0;
            out.clamped = true;
        }
    }
    if (raw[5] + raw[6] <= 0.0) {
        raw[6] = kBetaFloor;
        out.clamped = true;
    }
    out.params = vector_to_params(raw);
    return out;
}

TrainingExample make_example(const FusedFeatures& features, const KernelModelParams& params) {
    return TrainingExample{features.as_vector(), params_to_vector(params)};
}

double mse_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y_std) {
    Eigen::MatrixXd out = forward_trace(model, x).back();
    return 0.5 * (out - y_std).squaredNorm() /
           static_cast<double>(x.cols() * y_std.rows());
}

Gradients analytic_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                             const Eigen::MatrixXd& y_std) {
    const std::size_t layers = model.weights.size();
    const double scale = 1.0 / static_cast<double>(x.cols() * y_std.rows());

    auto activations = forward_trace(model, x);

    Gradients g;
    g.weights.resize(layers);
    g.biases.resize(layers);

    // Identity output, MSE loss: delta at the output is just the residual.
    Eigen::MatrixXd delta = (activations[layers] - y_std) * scale;
    for (std::size_t l = layers; l-- > 0;) {
        g.weights[l] = delta * activations[l].transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            // sigmoid'(z) expressed through the activation: a*(1-a).
            Eigen::ArrayXXd a = activations[l].array();
            delta = ((model.weights[l].transpose() * delta).array() * a * (1.0 - a))
                        .matrix();
        }
    }
    return g;
}

Gradients numeric_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& y_std, double epsilon) {
    MlpModel probe = model;
    Gradients g;
    g.weights.resize(model.weights.size());
    g.biases.resize(model.biases.size());
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        g.weights[l] = Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols());
        g.biases[l] = Eigen::VectorXd::Zero(model.biases[l].size());
        for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c) {
                const double saved = probe.weights[l](r, c);
                probe.weights[l](r, c) = saved + epsilon;
                const double up = mse_loss(probe, x, y_std);
                probe.weights[l](r, c) = saved - epsilon;
                const double down = mse_loss(probe, x, y_std);
                probe.weights[l](r, c) = saved;
                g.weights[l](r, c) = (up - down) / (2.0 * epsilon);
            }
        }
        for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) {
            const double saved = probe.biases[l][r];
            probe.biases[l][r] = saved + epsilon;
            const double up = mse_loss(probe, x, y_std);
            probe.biases[l][r] = saved - epsilon;
            const double down = mse_loss(probe, x, y_std);
            probe.biases[l][r] = saved;
            g.biases[l][r] = (up - down) / (2.0 * epsilon);
        }
    }
    return g;
}

double max_relative_gradient_error(const Gradients& a, const Gradients& b) {
    double worst = 0.0;
    auto update = [&](double ga, double gb) {
        double denom = std::max(std::abs(ga) + std::abs(gb), 1e-12);
        worst = std::max(worst, std::abs(ga - gb) / denom);
    };
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        for (Eigen::Index r = 0; r < a.weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < a.weights[l].cols(); ++c)
                update(a.weights[l](r, c), b.weights[l](r, c));
        for (Eigen::Index r = 0; r < a.biases[l].size(); ++r)
            update(a.biases[l][r], b.biases[l][r]);
    }
    return worst;
}

double gradient_check(const MlpModel& model, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& y_std, double epsilon) {
    Eigen::MatrixXd xm = x;
    Eigen::MatrixXd ym = y_std;
    return max_relative_gradient_error(analytic_gradients(model, xm, ym),
                                       numeric_gradients(model, xm, ym, epsilon));
}

CvResult cross_validate(const std::vector<TrainingExample>& dataset,
                        const std::vector<GridCell>& grid, const TrainConfig& cfg) {
    if (dataset.size() < 3)
        throw Error(ErrorKind::DatasetTooSmall,
                    "cross-validation needs at least 3 examples, got " +
                        std::to_string(dataset.size()));
    if (grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty hyperparameter grid");

    const auto data = canonicalize(dataset);
    const std::vector<int> sizes = layer_sizes_for(data, cfg);
    constexpr int kFolds = 3;

    // Deterministic fold assignment from the seed.
    Rng fold_rng = Rng(cfg.seed).fork(0xf01dULL);
    const auto order = shuffled_indices(data.size(), fold_rng);
    std::vector<int> fold_of(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        fold_of[order[i]] = static_cast<int>(i % kFolds);

    CvResult result;
    for (std::size_t cell_idx = 0; cell_idx < grid.size(); ++cell_idx) {
        const GridCell cell = grid[cell_idx];
        CvCellResult row;
        row.cell = cell;
        double acc = 0.0;
        for (int fold = 0; fold < kFolds; ++fold) {
            std::vector<TrainingExample> train_split, val_split;
            for (std::size_t i = 0; i < data.size(); ++i)
                (fold_of[i] == fold ? val_split : train_split).push_back(data[i]);
            double mape;
            if (train_split.empty() || val_split.empty()) {
                mape = std::numeric_limits<double>::infinity();
            } else {
                const Standardization stats = target_stats(train_split);
                std::vector<double> trace;
                const std::uint64_t run_seed =
                    cfg.seed + 1000003ULL * static_cast<std::uint64_t>(fold) +
                    29ULL * static_cast<std::uint64_t>(cell_idx);
                MlpModel m = fit_model(train_split, sizes, stats, cell.learning_rate,
                                       cell.batch_size, cfg.epochs, run_seed, &trace);
                const bool diverged = !trace.empty() && std::isnan(trace.back());
                mape = diverged ? std::numeric_limits<double>::infinity()
                                : prediction_mape_pct(m, val_split);
            }
            row.fold_mape_pct.push_back(mape);
            acc += mape;
        }
        row.mean_mape_pct = acc / kFolds;
        result.table.push_back(std::move(row));
    }

    // Lowest mean MAPE wins; ties toward smaller learning rate, then batch.
    const CvCellResult* best = &result.table.front();
    for (const auto& row : result.table) {
        if (row.mean_mape_pct < best->mean_mape_pct ||
            (row.mean_mape_pct == best->mean_mape_pct &&
             (row.cell.learning_rate < best->cell.learning_rate ||
              (row.cell.learning_rate == best->cell.learning_rate &&
               row.cell.batch_size < best->cell.batch_size))))
            best = &row;
    }
    result.best = best->cell;
    return result;
}

TrainResult train(const std::vector<TrainingExample>& dataset, const TrainConfig& cfg) {
    if (dataset.size() < 3)
        throw Error(ErrorKind::DatasetTooSmall,
                    "training needs at least 3 examples, got " +
                        std::to_string(dataset.size()));
    for (const auto& ex : dataset)
        if (!ex.features.allFinite() || !ex.targets.allFinite())
            throw Error(ErrorKind::InvalidArgument, "dataset contains non-finite values");

    const auto data = canonicalize(dataset);
    const std::vector<int> sizes = layer_sizes_for(data, cfg);
    const std::vector<GridCell> grid =
        cfg.grid.empty() ? std::vector<GridCell>{{cfg.learning_rate, cfg.batch_size}}
                         : cfg.grid;

    TrainResult result;
    result.cv = cross_validate(data, grid, cfg);

    const Standardization stats = target_stats(data);
    result.degenerate_targets = stats.degenerate;
    result.model = fit_model(data, sizes, stats, result.cv.best.learning_rate,
                             result.cv.best.batch_size, cfg.epochs, cfg.seed,
                             &result.epoch_loss);
    return result;
}

} // namespace dso
