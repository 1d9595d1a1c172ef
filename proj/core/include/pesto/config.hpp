#pragma once

#include "pesto/audio.hpp"
#include "pesto/cqt.hpp"
#include "pesto/losses.hpp"
#include "pesto/model.hpp"
#include "pesto/pairgen.hpp"
#include "pesto/trainer.hpp"

#include <json.hpp>

#include <string>

namespace pesto {

struct IoConfig {
    std::string data_dir;
    std::string model_path;
    std::string log_path;
    std::string cqt_cache_dir;
    bool operator==(const IoConfig&) const = default;
};

struct EvalOptions {
    double max_gap_s = 0.005; // half the 10 ms hop
    double confidence_floor = 0.0;
    std::string interpolation = "nearest"; // annotation alignment mode
    bool operator==(const EvalOptions&) const = default;
};

/// Whole-run configuration; defaults carry every pipeline constant so
/// experiment variants are pure config (or --override) changes.
struct RunConfig {
    CqtConfig cqt;
    CropConfig crop;
    AugmentConfig augment;
    ModelConfig model;
    LossConfig loss;
    TrainConfig train;
    SynthSpec synth;
    EvalOptions eval;
    IoConfig io;
    std::uint64_t seed = 0;

    void validate() const;
};

RunConfig default_config();

/// Strict parse: unknown keys anywhere are rejected. Sections omit-able;
/// a missing train/synth seed inherits the top-level seed.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

nlohmann::json to_canonical_json(const RunConfig& cfg);

/// "section.key=value" (value parsed as JSON when possible, else string).
void apply_override(RunConfig& cfg, const std::string& spec);

/// FNV-1a hash of the canonical JSON, hex string.
std::string config_fingerprint(const RunConfig& cfg);
std::string fingerprint_string(const std::string& payload);

// ADL serializers (strict from_json with unknown-key rejection).
void to_json(nlohmann::json& j, const CqtConfig& c);
void from_json(const nlohmann::json& j, CqtConfig& c);
void to_json(nlohmann::json& j, const CropConfig& c);
void from_json(const nlohmann::json& j, CropConfig& c);
void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const SynthSpec& c);
void from_json(const nlohmann::json& j, SynthSpec& c);
void to_json(nlohmann::json& j, const EvalOptions& c);
void from_json(const nlohmann::json& j, EvalOptions& c);
void to_json(nlohmann::json& j, const IoConfig& c);
void from_json(const nlohmann::json& j, IoConfig& c);

} // namespace pesto
