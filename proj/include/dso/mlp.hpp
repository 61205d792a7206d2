#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dso/dvfs_model.hpp"
#include "dso/ptx_features.hpp"
#include "dso/telemetry.hpp"

namespace dso {

inline constexpr int kFusedFeatureCount = 134; // 8 DCGM + 101 + 17 + 8 PTX
inline constexpr int kParamCount = 7;

// Dynamic and static features fused into the model input. Layout:
// dcgm(8), instr(101), dtype(17), memspace(8).
struct FusedFeatures {
    DcgmMetricVector dcgm;
    PtxFeatureVector ptx;

    Eigen::VectorXd as_vector() const;
};

// Parameter vector layout shared by training targets and predictions:
// [p0, kappa_pow, gamma, c, t0, alpha, beta].
Eigen::VectorXd params_to_vector(const KernelModelParams& p);
KernelModelParams vector_to_params(const Eigen::VectorXd& v);

// Fully-connected network with sigmoid hidden activations and identity
// output, trained on per-dimension standardized targets. weights[l] maps
// layer l to l+1 and has shape (sizes[l+1], sizes[l]).
struct MlpModel {
    std::vector<int> layer_sizes;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Eigen::VectorXd target_mean;
    Eigen::VectorXd target_std;
    std::uint64_t seed = 0;
};

// Default topology: 134 -> 100 -> 50 -> 25 -> 7.
std::vector<int> default_layer_sizes();

// Glorot-uniform initialization, deterministic per seed.
MlpModel init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);

void validate(const MlpModel& model);

// Network output in standardized target space.
Eigen::VectorXd forward_standardized(const MlpModel& model, const Eigen::VectorXd& x);

// Denormalized network output (target space).
Eigen::VectorXd forward_raw(const MlpModel& model, const Eigen::VectorXd& x);

struct ParamPrediction {
    KernelModelParams params;
    bool clamped = false; // any output pushed back into the valid region
};

// Predict model parameters for one kernel; outputs are clamped to the
// KernelModelParams invariants (and flagged) so downstream optimization
// always receives a valid value.
ParamPrediction predict_params(const MlpModel& model, const FusedFeatures& features);

struct TrainingExample {
    Eigen::VectorXd features; // size kFusedFeatureCount (or probe-sized in tests)
    Eigen::VectorXd targets;  // size kParamCount
};

TrainingExample make_example(const FusedFeatures& features, const KernelModelParams& params);

struct GridCell {
    double learning_rate;
    int batch_size;
};

struct TrainConfig {
    double learning_rate = 0.1;
    int batch_size = 16;
    int epochs = 500;
    std::uint64_t seed = 0;
    std::vector<GridCell> grid; // empty -> {(learning_rate, batch_size)}
    // Topology override; empty -> default hidden stack with entry/exit
    // sized from the dataset. A two-entry list gives a purely linear model.
    std::vector<int> layer_sizes;
};

std::vector<GridCell> default_grid();

struct CvCellResult {
    GridCell cell;
    std::vector<double> fold_mape_pct; // one per fold
    double mean_mape_pct = 0.0;        // +inf when any fold diverged
};

struct CvResult {
    std::vector<CvCellResult> table;
    GridCell best;
};

struct TrainResult {
    MlpModel model;
    CvResult cv;
    std::vector<double> epoch_loss;      // final full-set retrain trace
    std::vector<int> degenerate_targets; // zero-variance dims, trained unnormalized
};

// Mini-batch gradient descent with backpropagation. Dataset order is
// canonicalized internally, so permuting the input changes nothing.
// Hyperparameters come from 3-fold cross-validation over cfg.grid; the
// returned model is retrained on the full set with the winning cell.
// Throws Error(DatasetTooSmall) for fewer than 3 examples.
TrainResult train(const std::vector<TrainingExample>& dataset, const TrainConfig& cfg);

// 3-fold CV table alone (deterministic fold split from seed). Tie-breaking:
// lowest mean MAPE, then smaller learning rate, then smaller batch.
CvResult cross_validate(const std::vector<TrainingExample>& dataset,
                        const std::vector<GridCell>& grid, const TrainConfig& cfg);

// Per-weight gradients, same shapes as the model they differentiate.
struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// Analytic gradients of the mean squared error loss on one batch
// (columns of x / y_std) via backpropagation.
Gradients analytic_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                             const Eigen::MatrixXd& y_std);

// Central finite differences of the same loss, the verification oracle.
Gradients numeric_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& y_std, double epsilon);

// Loss both gradient routes differentiate.
double mse_loss(const MlpModel& model, const Eigen::MatrixXd& x,
                const Eigen::MatrixXd& y_std);

// Worst-case relative disagreement between two gradient sets.
double max_relative_gradient_error(const Gradients& a, const Gradients& b);

// Backprop-vs-finite-difference check on one sample.
double gradient_check(const MlpModel& model, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& y_std, double epsilon);

} // namespace dso
