#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>

#include "json.hpp"

#include "pmri/cgrid.hpp"
#include "pmri/pslr.hpp"
#include "pmri/train.hpp"

namespace pmri {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Strict JSON helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        if (!ok.contains(key)) throw ValidationError(where + ": unknown field '" + key + "'");
}

template <class T>
void read_field(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + ": field '" + std::string(key) + "' has the wrong type");
    }
}

}  // namespace detail

/// FNV-1a over the compact dump of a JSON value (keys are sorted by nlohmann::json).
inline std::string config_hash(const json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": invalid JSON: " + e.what());
    }
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << j.dump(2) << '\n';
    if (!f) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Simulation config
// ---------------------------------------------------------------------------

inline std::string to_string(SamplingPattern p) { return p == SamplingPattern::Points ? "points" : "lines"; }

inline DatasetSpec dataset_spec_from_json(const json& j) {
    const std::string where = "sim config";
    detail::reject_unknown(j,
                           {"height", "width", "coils", "sensitivity_support", "sensitivity_seed", "normalize",
                            "acceleration", "mask_sigma", "mask_seed", "pattern", "noise_sigma", "seed", "count"},
                           where);
    DatasetSpec s;
    s.sensitivities.coils = 4;
    s.mask.acceleration = 2.0;
    detail::read_field(j, "height", s.height, where);
    detail::read_field(j, "width", s.width, where);
    detail::read_field(j, "coils", s.sensitivities.coils, where);
    if (j.contains("sensitivity_support")) {
        std::vector<std::size_t> support;
        detail::read_field(j, "sensitivity_support", support, where);
        if (support.size() != 2) throw ValidationError(where + ": field 'sensitivity_support' must be [rows, cols]");
        s.sensitivities.support_h = support[0];
        s.sensitivities.support_w = support[1];
    }
    detail::read_field(j, "sensitivity_seed", s.sensitivities.seed, where);
    detail::read_field(j, "normalize", s.sensitivities.normalize, where);
    detail::read_field(j, "acceleration", s.mask.acceleration, where);
    detail::read_field(j, "mask_sigma", s.mask.sigma, where);
    detail::read_field(j, "mask_seed", s.mask.seed, where);
    if (j.contains("pattern")) {
        std::string p;
        detail::read_field(j, "pattern", p, where);
        if (p == "points") s.mask.pattern = SamplingPattern::Points;
        else if (p == "lines") s.mask.pattern = SamplingPattern::Lines;
        else throw ValidationError(where + ": field 'pattern' must be \"points\" or \"lines\"");
    }
    detail::read_field(j, "noise_sigma", s.noise_sigma, where);
    detail::read_field(j, "seed", s.seed, where);
    detail::read_field(j, "count", s.count, where);
    if (s.height == 0 || s.width == 0) throw ValidationError(where + ": field 'height'/'width' must be >= 1");
    try {
        s.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    }
    return s;
}

inline json to_json(const DatasetSpec& s) {
    return {{"height", s.height},
            {"width", s.width},
            {"coils", s.sensitivities.coils},
            {"sensitivity_support", {s.sensitivities.support_h, s.sensitivities.support_w}},
            {"sensitivity_seed", s.sensitivities.seed},
            {"normalize", s.sensitivities.normalize},
            {"acceleration", s.mask.acceleration},
            {"mask_sigma", s.mask.sigma},
            {"mask_seed", s.mask.seed},
            {"pattern", to_string(s.mask.pattern)},
            {"noise_sigma", s.noise_sigma},
            {"seed", s.seed},
            {"count", s.count}};
}

// ---------------------------------------------------------------------------
// PSLR config
// ---------------------------------------------------------------------------

inline PslrConfig pslr_config_from_json(const json& j) {
    const std::string where = "pslr config";
    detail::reject_unknown(j,
                           {"filter_size", "lambda", "beta", "eps0", "eps_decay", "eps_min_ratio", "outer_iterations",
                            "tolerance", "step_safety", "record_cost"},
                           where);
    PslrConfig c;
    if (j.contains("filter_size")) {
        std::vector<std::size_t> f;
        detail::read_field(j, "filter_size", f, where);
        if (f.size() != 2) throw ValidationError(where + ": field 'filter_size' must be [rows, cols]");
        c.filter_h = f[0];
        c.filter_w = f[1];
    }
    detail::read_field(j, "lambda", c.lambda, where);
    detail::read_field(j, "beta", c.beta, where);
    detail::read_field(j, "eps0", c.eps0, where);
    detail::read_field(j, "eps_decay", c.eps_decay, where);
    detail::read_field(j, "eps_min_ratio", c.eps_min_ratio, where);
    detail::read_field(j, "outer_iterations", c.outer_iterations, where);
    detail::read_field(j, "tolerance", c.tolerance, where);
    detail::read_field(j, "step_safety", c.step_safety, where);
    detail::read_field(j, "record_cost", c.record_cost, where);
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    }
    return c;
}

inline json to_json(const PslrConfig& c) {
    return {{"filter_size", {c.filter_h, c.filter_w}},
            {"lambda", c.lambda},
            {"beta", c.beta},
            {"eps0", c.eps0},
            {"eps_decay", c.eps_decay},
            {"eps_min_ratio", c.eps_min_ratio},
            {"outer_iterations", c.outer_iterations},
            {"tolerance", c.tolerance},
            {"step_safety", c.step_safety},
            {"record_cost", c.record_cost}};
}

inline json to_json(const IrlsCost& c) { return {{"total", c.total}, {"data", c.data}, {"nuclear", c.nuclear}}; }

inline json to_json(const PslrTrace& t) {
    json its = json::array();
    for (const auto& it : t.iterations)
        its.push_back({{"iteration", it.iteration},
                       {"epsilon", it.epsilon},
                       {"step", it.step},
                       {"relative_change", it.relative_change},
                       {"cost", to_json(it.cost)},
                       {"seconds", it.seconds}});
    return {{"initial_cost", to_json(t.initial_cost)},
            {"iterations", its},
            {"converged", t.converged},
            {"seconds", t.seconds}};
}

// ---------------------------------------------------------------------------
// Training config
// ---------------------------------------------------------------------------

inline TrainConfig train_config_from_json(const json& j) {
    const std::string where = "train config";
    detail::reject_unknown(j,
                           {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_epsilon", "seed", "loss",
                            "validation_fraction", "unrolls", "width", "kernel", "beta_init", "train_beta"},
                           where);
    TrainConfig c;
    detail::read_field(j, "epochs", c.epochs, where);
    detail::read_field(j, "batch_size", c.batch_size, where);
    detail::read_field(j, "learning_rate", c.adam.learning_rate, where);
    detail::read_field(j, "beta1", c.adam.beta1, where);
    detail::read_field(j, "beta2", c.adam.beta2, where);
    detail::read_field(j, "adam_epsilon", c.adam.epsilon, where);
    detail::read_field(j, "seed", c.seed, where);
    if (j.contains("loss")) {
        std::string l;
        detail::read_field(j, "loss", l, where);
        if (l == "kspace") c.loss = LossDomain::KSpace;
        else if (l == "image") c.loss = LossDomain::SosImage;
        else throw ValidationError(where + ": field 'loss' must be \"kspace\" or \"image\"");
    }
    detail::read_field(j, "validation_fraction", c.validation_fraction, where);
    detail::read_field(j, "unrolls", c.unrolls, where);
    detail::read_field(j, "width", c.width, where);
    detail::read_field(j, "kernel", c.kernel, where);
    detail::read_field(j, "beta_init", c.beta_init, where);
    detail::read_field(j, "train_beta", c.train_beta, where);
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    }
    return c;
}

inline json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.adam.learning_rate},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"adam_epsilon", c.adam.epsilon},
            {"seed", c.seed},
            {"loss", c.loss == LossDomain::KSpace ? "kspace" : "image"},
            {"validation_fraction", c.validation_fraction},
            {"unrolls", c.unrolls},
            {"width", c.width},
            {"kernel", c.kernel},
            {"beta_init", c.beta_init},
            {"train_beta", c.train_beta}};
}

inline json to_json(const std::vector<EpochLog>& log) {
    json out = json::array();
    for (const auto& e : log) {
        json row = {{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"beta_k", e.beta_k},
                    {"beta_i", e.beta_i},
                    {"seconds", e.seconds}};
        row["validation_loss"] = std::isnan(e.validation_loss) ? json(nullptr) : json(e.validation_loss);
        out.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model checkpoints: one CGRD file per tensor plus manifest.json
// ---------------------------------------------------------------------------

namespace detail {

inline CgridArray real_tensor(const double* data, std::vector<std::uint64_t> dims) {
    CgridArray a{std::move(dims), {}, Precision::Float64};
    a.data.resize(a.element_count());
    for (std::size_t k = 0; k < a.data.size(); ++k) a.data[k] = data[k];
    return a;
}

inline void read_real_tensor(const std::filesystem::path& path, double* out, const std::vector<std::uint64_t>& dims) {
    const CgridArray a = read_cgrid(path);
    if (a.dims != dims) throw IoError("checkpoint tensor " + path.string() + " has unexpected shape");
    for (std::size_t k = 0; k < a.data.size(); ++k) out[k] = a.data[k].real();
}

inline const char* denoiser_name(bool image) { return image ? "image" : "kspace"; }

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const NetParams& p, const json& train_config,
                            std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    json tensors = json::array();
    auto save_denoiser = [&](const DenoiserParams& d, bool image) {
        for (std::size_t l = 0; l < kDenoiserLayers; ++l) {
            const auto& layer = d.layers[l];
            // Eigen stores the weight matrix column-major; copy to row-major (out, in, k, k).
            Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = layer.weight;
            const std::string base = std::string(detail::denoiser_name(image)) + "_layer" + std::to_string(l);
            const std::vector<std::uint64_t> wdims{layer.out_channels, layer.in_channels, layer.kernel, layer.kernel};
            write_cgrid(dir / (base + "_weight.cgrid"), detail::real_tensor(w.data(), wdims));
            write_cgrid(dir / (base + "_bias.cgrid"), detail::real_tensor(layer.bias.data(), {layer.out_channels}));
            tensors.push_back({{"name", base + "_weight"}, {"file", base + "_weight.cgrid"}, {"dims", wdims}});
            tensors.push_back({{"name", base + "_bias"}, {"file", base + "_bias.cgrid"}, {"dims", {layer.out_channels}}});
        }
    };
    save_denoiser(p.kspace, false);
    if (p.image) save_denoiser(*p.image, true);
    json m = {{"format", "pmri-checkpoint"},
              {"version", 1},
              {"architecture", p.hybrid() ? "hybrid" : "kspace"},
              {"coils", p.coils()},
              {"unrolls", p.unrolls},
              {"width", p.kspace.width()},
              {"kernel", p.kspace.layers[0].kernel},
              {"log_beta_k", p.log_beta_k},
              {"log_beta_i", p.log_beta_i},
              {"beta_k", p.beta_k()},
              {"beta_i", p.beta_i()},
              {"train_beta", p.train_beta},
              {"seed", seed},
              {"train_config", train_config},
              {"train_config_hash", config_hash(train_config)},
              {"tensors", tensors}};
    write_json_file(dir / "manifest.json", m);
}

inline NetParams load_checkpoint(const std::filesystem::path& dir) {
    const json m = read_json_file(dir / "manifest.json");
    try {
        if (m.at("format") != "pmri-checkpoint") throw IoError(dir.string() + ": not a pmri checkpoint");
        const bool hybrid = m.at("architecture") == "hybrid";
        NetParams p = zero_params(m.at("coils").get<std::size_t>(), m.at("width").get<std::size_t>(), hybrid,
                                  m.at("unrolls").get<std::size_t>(), m.at("kernel").get<std::size_t>());
        p.log_beta_k = m.at("log_beta_k").get<double>();
        p.log_beta_i = m.at("log_beta_i").get<double>();
        p.train_beta = m.at("train_beta").get<bool>();
        auto load_denoiser = [&](DenoiserParams& d, bool image) {
            for (std::size_t l = 0; l < kDenoiserLayers; ++l) {
                auto& layer = d.layers[l];
                const std::string base = std::string(detail::denoiser_name(image)) + "_layer" + std::to_string(l);
                Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(layer.weight.rows(),
                                                                                         layer.weight.cols());
                detail::read_real_tensor(dir / (base + "_weight.cgrid"), w.data(),
                                         {layer.out_channels, layer.in_channels, layer.kernel, layer.kernel});
                layer.weight = w;
                detail::read_real_tensor(dir / (base + "_bias.cgrid"), layer.bias.data(), {layer.out_channels});
            }
        };
        load_denoiser(p.kspace, false);
        if (p.image) load_denoiser(*p.image, true);
        return p;
    } catch (const json::exception& e) {
        throw IoError(dir.string() + "/manifest.json: malformed manifest: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Per-method metrics bundle: SNR and wall-clock per sample and their means.
struct ReconReport {
    std::string method;
    std::vector<double> snr_db;
    std::vector<double> seconds;
    std::string config_hash;
    std::uint64_t seed = 0;

    static double mean(const std::vector<double>& v) {
        if (v.empty()) return std::nan("");
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }

    json to_json() const {
        if (snr_db.empty() && seconds.empty()) throw ValidationError("report: needs at least one sample");
        json j = {{"method", method}, {"config_hash", config_hash}, {"seed", seed}, {"samples", std::max(snr_db.size(), seconds.size())}};
        if (!snr_db.empty()) {
            j["snr_db"] = snr_db;
            j["mean_snr_db"] = mean(snr_db);
        }
        if (!seconds.empty()) {
            j["seconds"] = seconds;
            j["mean_seconds"] = mean(seconds);
        }
        return j;
    }
};

}  // namespace pmri
