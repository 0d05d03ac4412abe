#pragma once

#include "hypnos/eval.hpp"
#include "hypnos/trainer.hpp"

namespace hypnos {

// One declarative configuration for a whole run. The JSON schema mirrors the
// nested sections below; unknown keys are rejected with their full path, and
// every artifact embeds the canonical echo (plus its hash) for traceability.
struct RunConfig {
    int schema_version = 1;
    std::uint64_t seed = 42;
    DataConfig data;
    BackboneConfig backbone;
    LossWeights losses;
    PerceptualEncoder::Config perceptual;
    LatentDiscriminator::Config discriminator;
    TrainConfig trainer;
    EvalConfig eval;
};

RunConfig default_run_config();

// Canonical JSON echo (sorted keys, stable formatting) and its FNV-1a hash.
std::string run_config_echo(const RunConfig& cfg);
std::uint64_t run_config_hash(const RunConfig& cfg);

// Parses JSON text; missing keys take defaults, unknown keys raise
// ConfigError listing every offending path.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies one "section.key=value" override onto JSON text (value parsed as
// JSON when possible, else taken as a string) and returns the new text.
std::string apply_config_override(const std::string& json_text, const std::string& override_spec);

}  // namespace hypnos
