// dso: GPU DVFS energy-efficiency toolkit.
//
// Subcommands cover the whole pipeline: static PTX features, recorded DCGM
// telemetry, analytic model fitting, MLP training/prediction, DVFS
// optimization and the synthetic end-to-end campaign. All structured
// output is versioned JSON on stdout; errors go to stderr (exit 1), usage
// problems exit 2.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dso/error.hpp"
#include "dso/json_io.hpp"
#include "dso/mlp.hpp"
#include "dso/optimizer.hpp"
#include "dso/param_fit.hpp"
#include "dso/ptx_features.hpp"
#include "dso/sim_harness.hpp"
#include "dso/telemetry.hpp"

using json = nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw dso::Error(dso::ErrorKind::IoError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const json& doc, const std::string& out_path) {
    const std::string text = doc.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out)
            throw dso::Error(dso::ErrorKind::IoError, "cannot write '" + out_path + "'");
        out << text;
    }
}

std::uint64_t seed_or_env(std::optional<std::uint64_t> seed_flag) {
    if (seed_flag) return *seed_flag;
    if (const char* env = std::getenv("DSO_SEED"))
        return std::strtoull(env, nullptr, 10);
    return 0;
}

std::vector<dso::GridCell> parse_grid(const std::string& spec) {
    std::vector<dso::GridCell> grid;
    std::stringstream ss(spec);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto colon = cell.find(':');
        if (colon == std::string::npos)
            throw dso::Error(dso::ErrorKind::InvalidArgument,
                             "grid cells must look like LR:BATCH, got '" + cell + "'");
        grid.push_back({std::stod(cell.substr(0, colon)),
                        std::stoi(cell.substr(colon + 1))});
    }
    if (grid.empty())
        throw dso::Error(dso::ErrorKind::InvalidArgument, "empty grid specification");
    return grid;
}

// Normalize a `dcgmi dmon -e` dump into the ingest CSV schema. Lines
// starting with '#' or 'ID' are headers; data lines carry "GPU <idx>"
// followed by the eight metric columns in the ingest order.
std::string convert_dcgm_dump(const std::string& dump) {
    std::string csv = "timestamp,SMACT,SMOCC,TENSO,DRAMA,FP64A,FP32A,FP16A,INTAC\n";
    std::stringstream ss(dump);
    std::string line;
    int row = 0;
    while (std::getline(ss, line)) {
        std::stringstream fields(line);
        std::string first;
        if (!(fields >> first)) continue;
        if (first[0] == '#' || first == "ID" || first == "Id") continue;
        if (first == "GPU") {
            int gpu_index = 0;
            if (!(fields >> gpu_index)) continue;
        } else {
            char* end = nullptr;
            std::strtol(first.c_str(), &end, 10);
            if (end == first.c_str()) continue; // not a data line
        }
        std::vector<double> values;
        double v = 0.0;
        while (fields >> v) values.push_back(v);
        if (values.size() < 8) continue;
        csv += std::to_string(row++);
        for (std::size_t i = 0; i < 8; ++i) csv += "," + std::to_string(values[i]);
        csv += "\n";
    }
    if (row == 0)
        throw dso::Error(dso::ErrorKind::EmptyTrace, "no metric rows found in dump");
    return csv;
}

dso::FusedFeatures features_for_kernel(const std::string& ptx_path,
                                       const std::string& dcgm_path,
                                       const std::string& kernel_name) {
    const auto kernels = dso::parse_ptx(read_file(ptx_path));
    if (kernels.empty())
        throw dso::Error(dso::ErrorKind::MalformedPtx, "no kernels in '" + ptx_path + "'");
    const dso::KernelInstructionCounts* chosen = &kernels.front();
    if (!kernel_name.empty()) {
        chosen = nullptr;
        for (const auto& k : kernels)
            if (k.kernel_name == kernel_name) chosen = &k;
        if (!chosen)
            throw dso::Error(dso::ErrorKind::InvalidArgument,
                             "kernel '" + kernel_name + "' not found in '" + ptx_path + "'");
    }
    dso::FusedFeatures f;
    f.ptx = dso::featurize(*chosen);
    f.dcgm = dso::load_dcgm_samples(read_file(dcgm_path));
    return f;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GPU DVFS energy-efficiency toolkit"};
    app.require_subcommand(1);
    bool json_errors = false;
    app.add_flag("--json-errors", json_errors,
                 "emit machine-readable error JSON on stderr");

    // features ptx|dcgm
    auto* features = app.add_subcommand("features", "extract model input features");
    features->require_subcommand(1);
    std::string ptx_path;
    auto* features_ptx = features->add_subcommand("ptx", "static PTX feature vectors");
    features_ptx->add_option("file", ptx_path, "PTX assembly file")->required();
    std::string dcgm_path;
    auto* features_dcgm = features->add_subcommand("dcgm", "averaged DCGM metrics");
    features_dcgm->add_option("file", dcgm_path, "DCGM sample CSV")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "fit model parameters from measurements");
    std::string power_csv, time_csv;
    fit->add_option("--power", power_csv, "power samples CSV")->required();
    fit->add_option("--time", time_csv, "time samples CSV")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train the parameter predictor");
    std::string dataset_path, model_out, grid_spec;
    std::optional<std::uint64_t> train_seed;
    int train_epochs = 500;
    train_cmd->add_option("--dataset", dataset_path, "JSON-lines dataset")->required();
    train_cmd->add_option("--out", model_out, "model output path")->required();
    train_cmd->add_option("--grid", grid_spec, "grid cells LR:BATCH,LR:BATCH,...");
    train_cmd->add_option("--seed", train_seed, "training seed (or DSO_SEED)");
    train_cmd->add_option("--epochs", train_epochs, "epochs per training run");

    // predict
    auto* predict = app.add_subcommand("predict", "predict parameters for a kernel");
    std::string model_path, predict_ptx, predict_dcgm, kernel_name;
    predict->add_option("--model", model_path, "trained model JSON")->required();
    predict->add_option("--ptx", predict_ptx, "PTX assembly file")->required();
    predict->add_option("--dcgm", predict_dcgm, "DCGM sample CSV")->required();
    predict->add_option("--kernel", kernel_name, "kernel name (default: first)");

    // optimize
    auto* optimize = app.add_subcommand("optimize", "solve for the best DVFS setting");
    std::string params_path, domain_path;
    double eta = 0.8;
    bool oracle = false;
    optimize->add_option("--params", params_path, "model parameters JSON")->required();
    optimize->add_option("--domain", domain_path, "DVFS domain JSON")->required();
    optimize->add_option("--eta", eta, "energy-performance preference in [0, 1]");
    optimize->add_flag("--oracle", oracle, "cross-check against exhaustive enumeration");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run the synthetic end-to-end campaign");
    int corpus = 138, test = 20, sim_epochs = 1000;
    double noise = 0.01;
    std::string etas_spec = "0.2,0.4,0.6,0.8,1.0";
    std::string report_out;
    std::optional<std::uint64_t> sim_seed;
    bool oracle_predictor = false;
    simulate->add_option("--corpus", corpus, "training corpus size");
    simulate->add_option("--test", test, "held-out kernel count");
    simulate->add_option("--etas", etas_spec, "comma-separated eta values");
    simulate->add_option("--seed", sim_seed, "campaign seed (or DSO_SEED)");
    simulate->add_option("--noise", noise, "measurement noise level");
    simulate->add_option("--epochs", sim_epochs, "MLP training epochs");
    simulate->add_option("--out", report_out, "report output path (default stdout)");
    simulate->add_flag("--oracle-predictor", oracle_predictor,
                       "score with ground-truth parameters instead of the MLP");

    // convert-dcgm
    auto* convert = app.add_subcommand("convert-dcgm", "normalize a dcgmi dmon dump");
    std::string dump_path;
    convert->add_option("file", dump_path, "dcgmi dmon output")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*features_ptx) {
            json out{{"format_version", dso::kFormatVersion}, {"kernels", json::array()}};
            for (const auto& k : dso::parse_ptx(read_file(ptx_path)))
                out["kernels"].push_back(dso::feature_json(k.kernel_name, dso::featurize(k)));
            write_output(out, "");
        } else if (*features_dcgm) {
            write_output(dso::to_json(dso::load_dcgm_samples(read_file(dcgm_path))), "");
        } else if (*fit) {
            const auto psamples = dso::load_power_samples_csv(read_file(power_csv));
            const auto tsamples = dso::load_time_samples_csv(read_file(time_csv));
            const dso::PowerFit pf = dso::fit_power(psamples);
            const dso::TimeFit tf = dso::fit_time(tsamples);
            const dso::KernelModelParams params{pf.p0, pf.kappa_pow, pf.gamma, pf.c,
                                                tf.t0, tf.alpha,     tf.beta};
            json out = dso::to_json(params);
            out["diagnostics"] = {
                {"power_mape_pct", pf.mape_pct},
                {"power_constraint_active", pf.constraint_active},
                {"time_mape_pct", tf.mape_pct},
                {"time_constraint_active", tf.constraint_active},
                {"partial_identifiability", tf.partial_identifiability},
                {"time_fit_iterations", tf.iterations},
            };
            write_output(out, "");
        } else if (*train_cmd) {
            dso::TrainConfig cfg;
            cfg.seed = seed_or_env(train_seed);
            cfg.epochs = train_epochs;
            cfg.grid = grid_spec.empty() ? dso::default_grid() : parse_grid(grid_spec);
            const auto dataset = dso::dataset_from_jsonl(read_file(dataset_path));
            const dso::TrainResult result = dso::train(dataset, cfg);
            write_output(dso::to_json(result.model), model_out);

            json cv_table = json::array();
            for (const auto& row : result.cv.table)
                cv_table.push_back(json{{"learning_rate", row.cell.learning_rate},
                                        {"batch_size", row.cell.batch_size},
                                        {"fold_mape_pct", row.fold_mape_pct},
                                        {"mean_mape_pct", row.mean_mape_pct}});
            write_output(json{{"format_version", dso::kFormatVersion},
                              {"model_path", model_out},
                              {"selected",
                               {{"learning_rate", result.cv.best.learning_rate},
                                {"batch_size", result.cv.best.batch_size}}},
                              {"cv_table", cv_table},
                              {"degenerate_targets", result.degenerate_targets},
                              {"final_loss", result.epoch_loss.empty()
                                                 ? 0.0
                                                 : result.epoch_loss.back()}},
                         "");
        } else if (*predict) {
            const dso::MlpModel model =
                dso::model_from_json(dso::parse_json(read_file(model_path), "model"));
            const dso::FusedFeatures f =
                features_for_kernel(predict_ptx, predict_dcgm, kernel_name);
            const dso::ParamPrediction pred = dso::predict_params(model, f);
            json out = dso::to_json(pred.params);
            out["clamped"] = pred.clamped;
            write_output(out, "");
        } else if (*optimize) {
            if (!(eta >= 0.0 && eta <= 1.0)) {
                // Bad flag value, not a module failure: usage error.
                std::cerr << "dso optimize: EtaOutOfRange: --eta must lie in [0, 1]\n";
                return 2;
            }
            const dso::KernelModelParams params =
                dso::params_from_json(dso::parse_json(read_file(params_path), "params"));
            const dso::DvfsDomain domain =
                dso::domain_from_json(dso::parse_json(read_file(domain_path), "domain"));
            const dso::OptimizationResult result =
                dso::optimal_config(params, domain, eta, domain.dev.pmax_w);
            if (oracle) {
                const dso::OptimizationResult exhaustive =
                    dso::brute_force_config(params, domain, eta, domain.dev.pmax_w);
                if (result.cost > exhaustive.cost * (1.0 + 1e-9))
                    throw dso::Error(dso::ErrorKind::InvalidArgument,
                                     "structured search disagrees with enumeration: " +
                                         std::to_string(result.cost) + " vs " +
                                         std::to_string(exhaustive.cost));
            }
            write_output(dso::to_json(result), "");
        } else if (*simulate) {
            dso::CampaignConfig cfg;
            cfg.corpus_size = corpus;
            cfg.test_size = test;
            cfg.noise_level = noise;
            cfg.seed = seed_or_env(sim_seed);
            cfg.oracle_predictor = oracle_predictor;
            cfg.train_epochs = sim_epochs;
            cfg.etas.clear();
            std::stringstream ss(etas_spec);
            std::string tok;
            while (std::getline(ss, tok, ',')) cfg.etas.push_back(std::stod(tok));
            for (double e : cfg.etas)
                if (!(e >= 0.0 && e <= 1.0)) {
                    std::cerr << "dso simulate: EtaOutOfRange: eta values must lie in [0, 1]\n";
                    return 2;
                }
            write_output(dso::to_json(dso::run_campaign(cfg)), report_out);
        } else if (*convert) {
            std::cout << convert_dcgm_dump(read_file(dump_path));
        }
    } catch (const dso::Error& e) {
        if (json_errors) {
            json err{{"error",
                      {{"kind", dso::error_kind_name(e.kind())}, {"message", e.message()}}}};
            std::cerr << err.dump() << "\n";
        } else {
            std::cerr << "dso: " << e.what() << "\n";
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "dso: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
