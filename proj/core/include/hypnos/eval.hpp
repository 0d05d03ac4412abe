#pragma once

#include <map>

#include "hypnos/backbone.hpp"
#include "hypnos/metrics.hpp"

namespace hypnos {

// Structured prompt sampler lists: a prompt is drawn as
// "<image_type> of <sks> <figurine>, <background>, <style>", with the style
// list conditional on the drawn image type.
struct PromptListBundle {
    std::vector<std::string> image_types;
    std::vector<std::string> backgrounds;
    std::map<std::string, std::vector<std::string>> styles_by_type;

    void validate() const;
};

// Default bundle: 6 image types, 12 backgrounds, 3 styles per type.
PromptListBundle default_prompt_bundle();

std::string sample_prompt(const PromptListBundle& bundle, const SubjectSpec& spec, Rng& rng);
std::string invariant_prompt(const SubjectSpec& spec);

enum class EvalRegime { invariant, varying };
EvalRegime eval_regime_from_string(const std::string& s);
std::string eval_regime_to_string(EvalRegime r);

struct MetricStat {
    double mean = 0.0;
    double stddev = 0.0;
    std::int64_t n = 0;
};

struct EvalReport {
    std::string regime;
    std::map<std::string, MetricStat> metrics;
    int n_images = 0;
    int n_references = 0;
    int failures = 0;
    std::string config_echo;
    // Documented caveat attached to the prompt-alignment proxy.
    std::string prompt_align_caveat;
};

struct EvalConfig {
    int n_images = 50;
    int sample_steps = 20;
    std::uint64_t seed = 42;
    EvalRegime regime = EvalRegime::invariant;
    PromptListBundle bundle = default_prompt_bundle();
    std::vector<BlockWeight> lpips_weights = {{2, 0.35}, {3, 0.45}, {4, 0.2}};
};

// Order-independent mean/std accumulation (compensated summation).
MetricStat aggregate_stats(const std::vector<double>& values);

// Generates n_images with the regime's prompts, scores each against every
// instance reference, and aggregates mean/std per metric. FID is computed
// once between the generated and reference embedding sets.
EvalReport evaluate(DiffusionModel& model, const PerceptualEncoder& enc,
                    const std::vector<InstanceSample>& instances, const SubjectSpec& spec,
                    const EvalConfig& cfg, const std::string& config_echo = "");

void write_report_json(const std::filesystem::path& path, const EvalReport& report);
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace hypnos
