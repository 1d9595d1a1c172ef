#include "pesto/config.hpp"

#include <fstream>

namespace pesto {

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const char* section) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) { ok = true; break; }
        if (!ok)
            throw ValidationError(std::string("config: unknown key '") + it.key() + "' in " +
                                  section);
    }
}

template <class T>
void get_opt(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

void to_json(nlohmann::json& j, const CqtConfig& c) {
    j = {{"f_min", c.f_min},
         {"bins_per_semitone", c.bins_per_semitone},
         {"n_bins", c.n_bins},
         {"hop", c.hop},
         {"sample_rate", c.sample_rate},
         {"scale", c.scale == CqtScale::db ? "db" : "complex"}};
}

void from_json(const nlohmann::json& j, CqtConfig& c) {
    check_keys(j, {"f_min", "bins_per_semitone", "n_bins", "hop", "sample_rate", "scale"}, "cqt");
    get_opt(j, "f_min", c.f_min);
    get_opt(j, "bins_per_semitone", c.bins_per_semitone);
    get_opt(j, "n_bins", c.n_bins);
    get_opt(j, "hop", c.hop);
    get_opt(j, "sample_rate", c.sample_rate);
    if (j.contains("scale")) {
        const auto s = j.at("scale").get<std::string>();
        if (s == "db") c.scale = CqtScale::db;
        else if (s == "complex") c.scale = CqtScale::cplx;
        else throw ValidationError("config: cqt.scale must be 'db' or 'complex'");
    }
}

void to_json(nlohmann::json& j, const CropConfig& c) {
    j = {{"k_max", c.k_max}, {"input_bins", c.input_bins}};
}

void from_json(const nlohmann::json& j, CropConfig& c) {
    check_keys(j, {"k_max", "input_bins"}, "crop");
    get_opt(j, "k_max", c.k_max);
    get_opt(j, "input_bins", c.input_bins);
}

namespace {
const char* beta_name(BetaMode m) {
    switch (m) {
        case BetaMode::none: return "none";
        case BetaMode::constant: return "const";
        case BetaMode::uniform01: return "uniform01";
        case BetaMode::gauss: return "gauss";
    }
    return "none";
}
} // namespace

void to_json(nlohmann::json& j, const AugmentConfig& c) {
    j = {{"p_apply", c.p_apply},
         {"noise_std_min", c.noise_std_min},
         {"noise_std_max", c.noise_std_max},
         {"gain_db_min", c.gain_db_min},
         {"gain_db_max", c.gain_db_max},
         {"background_beta", beta_name(c.beta_mode)},
         {"beta_param", c.beta_param}};
}

void from_json(const nlohmann::json& j, AugmentConfig& c) {
    check_keys(j,
               {"p_apply", "noise_std_min", "noise_std_max", "gain_db_min", "gain_db_max",
                "background_beta", "beta_param"},
               "augment");
    get_opt(j, "p_apply", c.p_apply);
    get_opt(j, "noise_std_min", c.noise_std_min);
    get_opt(j, "noise_std_max", c.noise_std_max);
    get_opt(j, "gain_db_min", c.gain_db_min);
    get_opt(j, "gain_db_max", c.gain_db_max);
    get_opt(j, "beta_param", c.beta_param);
    if (j.contains("background_beta")) {
        const auto s = j.at("background_beta").get<std::string>();
        if (s == "none") c.beta_mode = BetaMode::none;
        else if (s == "const") c.beta_mode = BetaMode::constant;
        else if (s == "uniform01") c.beta_mode = BetaMode::uniform01;
        else if (s == "gauss") c.beta_mode = BetaMode::gauss;
        else throw ValidationError("config: augment.background_beta must be one of "
                                   "none/const/uniform01/gauss");
    }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"in_bins", c.in_bins},
         {"conv_channels", c.conv_channels},
         {"kernel_sizes", c.kernel_sizes},
         {"out_dim", c.out_dim},
         {"dropout", c.dropout},
         {"leaky_slope", c.leaky_slope},
         {"toeplitz", c.toeplitz}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    check_keys(j,
               {"in_bins", "conv_channels", "kernel_sizes", "out_dim", "dropout", "leaky_slope",
                "toeplitz"},
               "model");
    get_opt(j, "in_bins", c.in_bins);
    get_opt(j, "conv_channels", c.conv_channels);
    get_opt(j, "kernel_sizes", c.kernel_sizes);
    get_opt(j, "out_dim", c.out_dim);
    get_opt(j, "dropout", c.dropout);
    get_opt(j, "leaky_slope", c.leaky_slope);
    get_opt(j, "toeplitz", c.toeplitz);
}

void to_json(nlohmann::json& j, const LossConfig& c) {
    j = {{"alpha", c.alpha},
         {"tau", c.tau},
         {"weighting", c.grad_balanced ? "grad_balanced" : "fixed"},
         {"lambda_inv", c.lambda_inv},
         {"lambda_equiv", c.lambda_equiv},
         {"lambda_sce", c.lambda_sce},
         {"enable_inv", c.enable_inv},
         {"enable_equiv", c.enable_equiv},
         {"enable_sce", c.enable_sce}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
    check_keys(j,
               {"alpha", "tau", "weighting", "lambda_inv", "lambda_equiv", "lambda_sce",
                "enable_inv", "enable_equiv", "enable_sce"},
               "loss");
    get_opt(j, "alpha", c.alpha);
    get_opt(j, "tau", c.tau);
    get_opt(j, "lambda_inv", c.lambda_inv);
    get_opt(j, "lambda_equiv", c.lambda_equiv);
    get_opt(j, "lambda_sce", c.lambda_sce);
    get_opt(j, "enable_inv", c.enable_inv);
    get_opt(j, "enable_equiv", c.enable_equiv);
    get_opt(j, "enable_sce", c.enable_sce);
    if (j.contains("weighting")) {
        const auto s = j.at("weighting").get<std::string>();
        if (s == "fixed") c.grad_balanced = false;
        else if (s == "grad_balanced") c.grad_balanced = true;
        else throw ValidationError("config: loss.weighting must be fixed or grad_balanced");
    }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"batch_size", c.batch_size},
         {"lr", c.lr},
         {"epochs", c.epochs},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"eps_adam", c.eps_adam},
         {"seed", c.seed},
         {"checkpoint_every", c.checkpoint_every},
         {"log_every", c.log_every},
         {"grad_clip", c.grad_clip},
         {"frame_stride", c.frame_stride}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    check_keys(j,
               {"batch_size", "lr", "epochs", "beta1", "beta2", "eps_adam", "seed",
                "checkpoint_every", "log_every", "grad_clip", "frame_stride"},
               "train");
    get_opt(j, "batch_size", c.batch_size);
    get_opt(j, "lr", c.lr);
    get_opt(j, "epochs", c.epochs);
    get_opt(j, "beta1", c.beta1);
    get_opt(j, "beta2", c.beta2);
    get_opt(j, "eps_adam", c.eps_adam);
    get_opt(j, "seed", c.seed);
    get_opt(j, "checkpoint_every", c.checkpoint_every);
    get_opt(j, "log_every", c.log_every);
    get_opt(j, "grad_clip", c.grad_clip);
    get_opt(j, "frame_stride", c.frame_stride);
}

void to_json(nlohmann::json& j, const SynthSpec& c) {
    j = {{"n_samples", c.n_samples},
         {"f0_min_hz", c.f0_min_hz},
         {"f0_max_hz", c.f0_max_hz},
         {"n_harmonics_max", c.n_harmonics_max},
         {"amp_decay_min", c.amp_decay_min},
         {"amp_decay_max", c.amp_decay_max},
         {"duration_s", c.duration_s},
         {"noise_floor", c.noise_floor},
         {"seed", c.seed},
         {"sample_rate", c.sample_rate}};
}

void from_json(const nlohmann::json& j, SynthSpec& c) {
    check_keys(j,
               {"n_samples", "f0_min_hz", "f0_max_hz", "n_harmonics_max", "amp_decay_min",
                "amp_decay_max", "duration_s", "noise_floor", "seed", "sample_rate"},
               "synth");
    get_opt(j, "n_samples", c.n_samples);
    get_opt(j, "f0_min_hz", c.f0_min_hz);
    get_opt(j, "f0_max_hz", c.f0_max_hz);
    get_opt(j, "n_harmonics_max", c.n_harmonics_max);
    get_opt(j, "amp_decay_min", c.amp_decay_min);
    get_opt(j, "amp_decay_max", c.amp_decay_max);
    get_opt(j, "duration_s", c.duration_s);
    get_opt(j, "noise_floor", c.noise_floor);
    get_opt(j, "seed", c.seed);
    get_opt(j, "sample_rate", c.sample_rate);
}

void to_json(nlohmann::json& j, const EvalOptions& c) {
    j = {{"max_gap_s", c.max_gap_s},
         {"confidence_floor", c.confidence_floor},
         {"interpolation", c.interpolation}};
}

void from_json(const nlohmann::json& j, EvalOptions& c) {
    check_keys(j, {"max_gap_s", "confidence_floor", "interpolation"}, "eval");
    get_opt(j, "max_gap_s", c.max_gap_s);
    get_opt(j, "confidence_floor", c.confidence_floor);
    get_opt(j, "interpolation", c.interpolation);
    if (c.interpolation != "nearest" && c.interpolation != "linear")
        throw ValidationError("config: eval.interpolation must be nearest or linear");
}

void to_json(nlohmann::json& j, const IoConfig& c) {
    j = {{"data_dir", c.data_dir},
         {"model_path", c.model_path},
         {"log_path", c.log_path},
         {"cqt_cache_dir", c.cqt_cache_dir}};
}

void from_json(const nlohmann::json& j, IoConfig& c) {
    check_keys(j, {"data_dir", "model_path", "log_path", "cqt_cache_dir"}, "io");
    get_opt(j, "data_dir", c.data_dir);
    get_opt(j, "model_path", c.model_path);
    get_opt(j, "log_path", c.log_path);
    get_opt(j, "cqt_cache_dir", c.cqt_cache_dir);
}

void RunConfig::validate() const {
    cqt.validate();
    crop.validate();
    augment.validate();
    model.validate();
    loss.validate();
    train.validate();
    if (crop.input_bins != cqt.n_bins)
        throw ValidationError("config: crop.input_bins must equal cqt.n_bins");
    if (model.in_bins != crop.out_bins())
        throw ValidationError("config: model.in_bins must equal crop out_bins (" +
                              std::to_string(crop.out_bins()) + ")");
}

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_config(const nlohmann::json& j) {
    check_keys(j, {"cqt", "crop", "augment", "model", "loss", "train", "synth", "eval", "io",
                   "seed"},
               "top level");
    RunConfig cfg;
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("cqt")) j.at("cqt").get_to(cfg.cqt);
    if (j.contains("crop")) j.at("crop").get_to(cfg.crop);
    if (j.contains("augment")) j.at("augment").get_to(cfg.augment);
    if (j.contains("model")) j.at("model").get_to(cfg.model);
    if (j.contains("loss")) j.at("loss").get_to(cfg.loss);
    if (j.contains("train")) j.at("train").get_to(cfg.train);
    if (j.contains("synth")) j.at("synth").get_to(cfg.synth);
    if (j.contains("eval")) j.at("eval").get_to(cfg.eval);
    if (j.contains("io")) j.at("io").get_to(cfg.io);
    // Section seeds inherit the top-level seed unless set explicitly.
    if (!(j.contains("train") && j.at("train").contains("seed"))) cfg.train.seed = cfg.seed;
    if (!(j.contains("synth") && j.at("synth").contains("seed"))) cfg.synth.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("load_config: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_config: ") + e.what());
    }
    return parse_config(j);
}

nlohmann::json to_canonical_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["cqt"] = cfg.cqt;
    j["crop"] = cfg.crop;
    j["augment"] = cfg.augment;
    j["model"] = cfg.model;
    j["loss"] = cfg.loss;
    j["train"] = cfg.train;
    j["synth"] = cfg.synth;
    j["eval"] = cfg.eval;
    j["io"] = cfg.io;
    return j;
}

void save_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream f(path);
    if (!f) throw FormatError("save_config: cannot open " + path + " for writing");
    f << to_canonical_json(cfg).dump(2) << '\n';
}

void apply_override(RunConfig& cfg, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
        throw ValidationError("override: expected section.key=value, got " + spec);
    const std::string key = spec.substr(0, eq);
    const std::string value = spec.substr(eq + 1);

    nlohmann::json j = to_canonical_json(cfg);
    nlohmann::json* node = &j;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (part.empty()) throw ValidationError("override: empty key segment in " + spec);
        if (dot == std::string::npos) {
            nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
            if (parsed.is_discarded()) parsed = value; // plain string
            (*node)[part] = parsed;
            break;
        }
        if (!node->contains(part))
            throw ValidationError("override: unknown section '" + part + "' in " + spec);
        node = &(*node)[part];
        pos = dot + 1;
    }
    cfg = parse_config(j);
}

std::string fingerprint_string(const std::string& payload) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : payload) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_fingerprint(const RunConfig& cfg) {
    return fingerprint_string(to_canonical_json(cfg).dump());
}

} // namespace pesto
