#pragma once

#include <optional>

#include "hypnos/backbone.hpp"
#include "hypnos/checkpoint.hpp"
#include "hypnos/dataprep.hpp"
#include "hypnos/ld.hpp"
#include "hypnos/losses.hpp"

namespace hypnos {

enum class TrainMode {
    hypnos,
    dreambooth_baseline,
    ablation_no_perceptual,
    ablation_no_ld,
    ablation_ungated_perceptual,
};

TrainMode train_mode_from_string(const std::string& s);
std::string train_mode_to_string(TrainMode m);

struct TrainConfig {
    int total_steps = 800;
    int ld_pretrain_steps = 600;
    LossWeights weights;
    double lr = 1e-3;
    double ld_lr = 1e-3;
    int ld_interleave = 1;  // discriminator updates every N generator steps
    std::uint64_t seed = 42;
    TrainMode mode = TrainMode::hypnos;
};

struct StepRecord {
    LossBreakdown losses;
    double d_loss = 0.0;  // discriminator objective at this step (0 if none ran)
};

struct TrainingError : std::runtime_error {
    TrainingError(const std::string& msg, int step, LossBreakdown last)
        : std::runtime_error(msg), step(step), last_finite(last) {}
    int step;
    LossBreakdown last_finite;
};

// Orchestrates the finetuning loop: discriminator pretraining, then
// total_steps joint steps of the four-term objective with the adversarial
// interleave. The codec and the perceptual encoder stay frozen throughout.
class Trainer {
public:
    Trainer(BackboneConfig backbone_cfg, DataConfig data_cfg, LatentDiscriminator::Config ld_cfg,
            PerceptualEncoder::Config perc_cfg, TrainConfig cfg);

    // Generates data and runs the frozen-encoder / discriminator pretraining
    // phases the mode needs. Must be called before stepping.
    void prepare();

    StepRecord training_step(const InstanceSample& instance, const ClassSample& cls, int step);
    // Full run; returns the per-step history.
    std::vector<StepRecord> train();

    // Effective weights after mode adjustments (which terms are active).
    LossWeights effective_weights() const;
    bool ld_active() const;
    bool perceptual_active() const;
    bool inverse_gaussian_active() const { return cfg_.mode != TrainMode::dreambooth_baseline; }

    CheckpointData make_checkpoint(const std::string& config_json, int step) const;
    void restore(const CheckpointData& ckpt);

    DiffusionModel& model() { return model_; }
    const DiffusionModel& model() const { return model_; }
    LatentDiscriminator& discriminator() { return ld_; }
    PerceptualEncoder& perceptual() { return perc_; }
    const std::vector<InstanceSample>& instances() const { return instances_; }
    const std::vector<ClassSample>& classes() const { return classes_; }
    const LdPretrainResult& ld_pretrain_result() const { return ld_pretrain_; }
    const TrainConfig& config() const { return cfg_; }
    const DataConfig& data_config() const { return data_cfg_; }
    std::uint64_t codec_hash() const { return model_.codec().byte_hash(); }

private:
    TrainConfig cfg_;
    DataConfig data_cfg_;
    DiffusionModel model_;
    LatentDiscriminator ld_;
    PerceptualEncoder perc_;
    std::vector<InstanceSample> instances_;
    std::vector<ClassSample> classes_;
    std::optional<LdDatasetSampler> ld_sampler_;
    LdPretrainResult ld_pretrain_;
    nn::Adam opt_denoiser_;
    nn::Adam opt_text_;
    nn::Adam opt_ld_;
    Rng rng_;
    bool prepared_ = false;
    LossBreakdown last_finite_;
};

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& history);
void write_ld_pretrain_csv(const std::filesystem::path& path, const LdPretrainResult& result);

}  // namespace hypnos
