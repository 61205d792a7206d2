#include "dso/json_io.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "dso/error.hpp"

using json = nlohmann::json;

namespace dso {

namespace {

double require_number(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number())
        throw Error(ErrorKind::SchemaMismatch,
                    "missing or non-numeric field '" + std::string(key) + "'");
    return j.at(key).get<double>();
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& arr, const char* what) {
    if (!arr.is_array())
        throw Error(ErrorKind::SchemaMismatch, std::string(what) + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    Eigen::Index i = 0;
    for (const auto& x : arr) {
        if (!x.is_number())
            throw Error(ErrorKind::SchemaMismatch,
                        std::string(what) + " must contain only numbers");
        v[i++] = x.get<double>();
    }
    return v;
}

} // namespace

nlohmann::json parse_json(std::string_view text, std::string_view what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw Error(ErrorKind::SchemaMismatch,
                    std::string(what) + ": not valid JSON");
    return j;
}

json to_json(const KernelModelParams& p) {
    return json{{"format_version", kFormatVersion},
                {"p0", p.p0},
                {"kappa_pow", p.kappa_pow},
                {"gamma", p.gamma},
                {"c", p.c},
                {"t0", p.t0},
                {"alpha", p.alpha},
                {"beta", p.beta}};
}

KernelModelParams params_from_json(const json& j) {
    KernelModelParams p{require_number(j, "p0"),    require_number(j, "kappa_pow"),
                        require_number(j, "gamma"), require_number(j, "c"),
                        require_number(j, "t0"),    require_number(j, "alpha"),
                        require_number(j, "beta")};
    validate(p);
    return p;
}

json to_json(const DeviceConstants& dev) {
    return json{{"kappa_vf", dev.kappa_vf},
                {"pmax_w", dev.pmax_w},
                {"vmin_v", dev.vmin_v},
                {"vmax_v", dev.vmax_v},
                {"mhz_per_unit", dev.mhz_per_unit}};
}

DeviceConstants device_from_json(const json& j) {
    DeviceConstants dev{require_number(j, "kappa_vf"), require_number(j, "pmax_w"),
                        require_number(j, "vmin_v"), require_number(j, "vmax_v"),
                        require_number(j, "mhz_per_unit")};
    validate(dev);
    return dev;
}

json to_json(const DvfsDomain& domain) {
    return json{{"format_version", kFormatVersion},
                {"core_freqs_mhz", domain.core_freqs_mhz},
                {"mem_freqs_mhz", domain.mem_freqs_mhz},
                {"device", to_json(domain.dev)}};
}

DvfsDomain domain_from_json(const json& j) {
    DvfsDomain domain;
    if (!j.contains("core_freqs_mhz") || !j.contains("mem_freqs_mhz") ||
        !j.contains("device"))
        throw Error(ErrorKind::SchemaMismatch,
                    "domain needs core_freqs_mhz, mem_freqs_mhz and device");
    for (const auto& f : j.at("core_freqs_mhz"))
        domain.core_freqs_mhz.push_back(f.get<double>());
    for (const auto& f : j.at("mem_freqs_mhz"))
        domain.mem_freqs_mhz.push_back(f.get<double>());
    domain.dev = device_from_json(j.at("device"));
    validate(domain);
    return domain;
}

json to_json(const DvfsConfig& cfg) {
    return json{{"vc", cfg.vc}, {"fc_mhz", cfg.fc_mhz}, {"fm_mhz", cfg.fm_mhz}};
}

json to_json(const OptimizationResult& result) {
    return json{{"format_version", kFormatVersion},
                {"vc", result.best.vc},
                {"fc_mhz", result.best.fc_mhz},
                {"fm_mhz", result.best.fm_mhz},
                {"cost", result.cost},
                {"energy_j", result.energy_j},
                {"time_s", result.time_s},
                {"candidates_evaluated", result.candidates_evaluated},
                {"fallback", result.fallback}};
}

json to_json(const DcgmMetricVector& m) {
    return json{{"format_version", kFormatVersion},
                {"smact", m.smact},
                {"smocc", m.smocc},
                {"tenso", m.tenso},
                {"drama", m.drama},
                {"fp64a", m.fp64a},
                {"fp32a", m.fp32a},
                {"fp16a", m.fp16a},
                {"intac", m.intac}};
}

json feature_json(const std::string& kernel_name, const PtxFeatureVector& features) {
    return json{{"kernel", kernel_name},
                {"instr", vector_to_json(features.instr)},
                {"dtype", vector_to_json(features.dtype)},
                {"memspace", vector_to_json(features.memspace)}};
}

json to_json(const MlpModel& model) {
    validate(model);
    for (const auto& w : model.weights)
        if (!w.allFinite())
            throw Error(ErrorKind::InvalidModel, "non-finite weights cannot be serialized");
    for (const auto& b : model.biases)
        if (!b.allFinite())
            throw Error(ErrorKind::InvalidModel, "non-finite biases cannot be serialized");

    json weights = json::array();
    for (const auto& w : model.weights) {
        json flat = json::array();
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
        weights.push_back(std::move(flat));
    }
    json biases = json::array();
    for (const auto& b : model.biases) biases.push_back(vector_to_json(b));

    return json{{"format_version", kFormatVersion},
                {"layer_sizes", model.layer_sizes},
                {"weights", weights},
                {"biases", biases},
                {"target_mean", vector_to_json(model.target_mean)},
                {"target_std", vector_to_json(model.target_std)},
                {"seed", model.seed}};
}

MlpModel model_from_json(const json& j) {
    if (!j.contains("layer_sizes") || !j.contains("weights") || !j.contains("biases") ||
        !j.contains("target_mean") || !j.contains("target_std"))
        throw Error(ErrorKind::SchemaMismatch, "incomplete model document");

    MlpModel model;
    for (const auto& s : j.at("layer_sizes")) model.layer_sizes.push_back(s.get<int>());
    if (model.layer_sizes.size() < 2)
        throw Error(ErrorKind::InvalidModel, "need at least two layers");

    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != model.layer_sizes.size() - 1 || biases.size() != weights.size())
        throw Error(ErrorKind::InvalidModel, "layer count mismatch");

    for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
        const auto rows = static_cast<Eigen::Index>(model.layer_sizes[l + 1]);
        const auto cols = static_cast<Eigen::Index>(model.layer_sizes[l]);
        const auto& flat = weights.at(l);
        if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
            throw Error(ErrorKind::InvalidModel, "weight matrix size mismatch");
        Eigen::MatrixXd w(rows, cols);
        Eigen::Index k = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = flat.at(k++).get<double>();
        model.weights.push_back(std::move(w));
        model.biases.push_back(vector_from_json(biases.at(l), "biases"));
    }
    model.target_mean = vector_from_json(j.at("target_mean"), "target_mean");
    model.target_std = vector_from_json(j.at("target_std"), "target_std");
    model.seed = j.value("seed", std::uint64_t{0});
    validate(model);
    return model;
}

json to_json(const CampaignReport& report) {
    json rows = json::array();
    for (const auto& row : report.rows) {
        json apps = json::array();
        for (const auto& app : row.apps) {
            apps.push_back(json{{"name", app.name},
                                {"default", to_json(app.default_cfg)},
                                {"optimized", to_json(app.optimized_cfg)},
                                {"energy_saving_pct", app.energy_saving_pct},
                                {"time_loss_pct", app.time_loss_pct}});
        }
        rows.push_back(json{{"eta", row.eta},
                            {"mean_energy_saving_pct", row.mean_energy_saving_pct},
                            {"mean_time_loss_pct", row.mean_time_loss_pct},
                            {"apps", std::move(apps)}});
    }
    return json{{"format_version", kFormatVersion},
                {"seed", report.seed},
                {"corpus_size", report.corpus_size},
                {"test_size", report.test_size},
                {"noise_level", report.noise_level},
                {"oracle_predictor", report.oracle_predictor},
                {"time_mape_pct", report.time_mape_pct},
                {"power_mape_pct", report.power_mape_pct},
                {"selected_cell",
                 json{{"learning_rate", report.selected_cell.learning_rate},
                      {"batch_size", report.selected_cell.batch_size}}},
                {"etas", std::move(rows)}};
}

json to_json(const SyntheticKernel& kernel) {
    return json{{"name", kernel.name},
                {"truth", to_json(kernel.truth)},
                {"dcgm", to_json(kernel.features.dcgm)},
                {"ptx",
                 json{{"instr", vector_to_json(kernel.features.ptx.instr)},
                      {"dtype", vector_to_json(kernel.features.ptx.dtype)},
                      {"memspace", vector_to_json(kernel.features.ptx.memspace)}}}};
}

json corpus_to_json(const std::vector<SyntheticKernel>& corpus) {
    json kernels = json::array();
    for (const auto& k : corpus) kernels.push_back(to_json(k));
    return json{{"format_version", kFormatVersion}, {"kernels", std::move(kernels)}};
}

std::string dataset_to_jsonl(const std::vector<TrainingExample>& dataset) {
    std::string out;
    for (const auto& ex : dataset) {
        json line{{"features", vector_to_json(ex.features)},
                  {"targets", vector_to_json(ex.targets)}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

std::vector<TrainingExample> dataset_from_jsonl(std::string_view text) {
    std::vector<TrainingExample> dataset;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(
            pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            json j = parse_json(line, "dataset line " + std::to_string(line_no));
            if (!j.contains("features") || !j.contains("targets"))
                throw Error(ErrorKind::SchemaMismatch,
                            "dataset line " + std::to_string(line_no) +
                                " needs features and targets");
            dataset.push_back(TrainingExample{
                vector_from_json(j.at("features"), "features"),
                vector_from_json(j.at("targets"), "targets")});
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return dataset;
}

} // namespace dso
