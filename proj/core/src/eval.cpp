#include "hypnos/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace hypnos {

void PromptListBundle::validate() const {
    if (image_types.empty()) throw ConfigError("prompt bundle: image_types empty");
    if (backgrounds.empty()) throw ConfigError("prompt bundle: backgrounds empty");
    for (const auto& t : image_types) {
        auto it = styles_by_type.find(t);
        if (it == styles_by_type.end() || it->second.empty())
            throw ConfigError("prompt bundle: image type '" + t + "' has no style list");
    }
}

PromptListBundle default_prompt_bundle() {
    PromptListBundle b;
    b.image_types = {"a photo", "a painting", "a sketch",
                     "a sculpture", "a poster", "an illustration"};
    b.backgrounds = {"on a wooden table",    "on a sandy beach",     "in a dense forest",
                     "on a city street",     "in a bright studio",   "on a mountain ridge",
                     "in a cozy kitchen",    "under a night sky",    "in a museum hall",
                     "on an office desk",    "in a flower garden",   "beside a calm lake"};
    b.styles_by_type = {
        {"a photo", {"shallow depth of field", "soft morning light", "high-contrast lighting"}},
        {"a painting", {"impressionist style", "oil on canvas", "watercolor wash"}},
        {"a sketch", {"pencil hatching", "charcoal shading", "ink linework"}},
        {"a sculpture", {"polished marble finish", "cast bronze patina", "carved wood grain"}},
        {"a poster", {"flat vector shapes", "retro color palette", "bold typography accents"}},
        {"an illustration",
         {"storybook coloring", "cel-shaded rendering", "isometric perspective"}},
    };
    return b;
}

std::string sample_prompt(const PromptListBundle& bundle, const SubjectSpec& spec, Rng& rng) {
    bundle.validate();
    const auto& type =
        bundle.image_types[size_t(rng.uniform_int(0, int(bundle.image_types.size()) - 1))];
    const auto& bg =
        bundle.backgrounds[size_t(rng.uniform_int(0, int(bundle.backgrounds.size()) - 1))];
    const auto& styles = bundle.styles_by_type.at(type);
    const auto& style = styles[size_t(rng.uniform_int(0, int(styles.size()) - 1))];
    return type + " of " + spec.instance_token + " " + spec.class_token + ", " + bg + ", " + style;
}

std::string invariant_prompt(const SubjectSpec& spec) {
    return "a photo of " + spec.instance_token + " " + spec.class_token;
}

EvalRegime eval_regime_from_string(const std::string& s) {
    if (s == "invariant") return EvalRegime::invariant;
    if (s == "varying") return EvalRegime::varying;
    throw std::invalid_argument("unknown eval regime: " + s);
}

std::string eval_regime_to_string(EvalRegime r) {
    return r == EvalRegime::invariant ? "invariant" : "varying";
}

namespace {
// Neumaier-compensated sum; order-independent to rounding.
double compensated_sum(const std::vector<double>& xs) {
    double sum = 0.0, c = 0.0;
    for (double x : xs) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            c += (sum - t) + x;
        else
            c += (x - t) + sum;
        sum = t;
    }
    return sum + c;
}
}  // namespace

MetricStat aggregate_stats(const std::vector<double>& values) {
    MetricStat s;
    s.n = static_cast<std::int64_t>(values.size());
    if (values.empty()) return s;
    s.mean = compensated_sum(values) / static_cast<double>(values.size());
    std::vector<double> sq(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - s.mean;
        sq[i] = d * d;
    }
    s.stddev = std::sqrt(compensated_sum(sq) / static_cast<double>(values.size()));
    return s;
}

EvalReport evaluate(DiffusionModel& model, const PerceptualEncoder& enc,
                    const std::vector<InstanceSample>& instances, const SubjectSpec& spec,
                    const EvalConfig& cfg, const std::string& config_echo) {
    if (instances.empty()) throw std::invalid_argument("evaluate: no instance references");
    if (cfg.n_images <= 0) throw std::invalid_argument("evaluate: n_images must be positive");
    cfg.bundle.validate();

    const Embedder embedder = make_perceptual_embedder(enc);
    const PromptAligner aligner(model.text_encoder(), enc, cfg.seed);
    Rng prompt_rng = Rng(cfg.seed).fork(0x70726F6D7074ULL);

    std::map<std::string, std::vector<double>> samples;
    std::vector<Tensor> gen_embeds, ref_embeds;
    for (const auto& inst : instances) ref_embeds.push_back(embedder(inst.image));

    EvalReport report;
    report.regime = eval_regime_to_string(cfg.regime);
    report.n_images = cfg.n_images;
    report.n_references = static_cast<int>(instances.size());
    report.config_echo = config_echo;
    report.prompt_align_caveat =
        "prompt_align is a toy text-image proxy and is the least aligned with "
        "qualitative outcomes; interpret directionally only";

    for (int i = 0; i < cfg.n_images; ++i) {
        const std::string prompt = cfg.regime == EvalRegime::invariant
                                       ? invariant_prompt(spec)
                                       : sample_prompt(cfg.bundle, spec, prompt_rng);
        ImageTensor gen;
        try {
            gen = model.sample(prompt, cfg.sample_steps,
                               Rng(cfg.seed).fork(0x67656E00ULL + std::uint64_t(i)).next_u64());
        } catch (const NumericError&) {
            ++report.failures;
            continue;
        }
        gen_embeds.push_back(embedder(gen));
        samples["prompt_align"].push_back(aligner(gen, prompt));
        for (const auto& inst : instances) {
            samples["ssim"].push_back(metric_ssim(gen, inst.image));
            samples["psnr"].push_back(metric_psnr(gen, inst.image));
            samples["embed_sim"].push_back(metric_embed_sim(gen, inst.image, embedder));
            samples["lpips"].push_back(metric_lpips_proxy(gen, inst.image, enc, cfg.lpips_weights));
            const auto ff = metric_foreground_fidelity(gen, inst);
            samples["struct_dev"].push_back(ff.struct_dev);
            samples["color_dev"].push_back(ff.color_dev);
        }
    }

    for (const auto& [name, values] : samples) report.metrics[name] = aggregate_stats(values);
    if (!gen_embeds.empty()) {
        MetricStat fid;
        fid.mean = metric_fid(gen_embeds, ref_embeds);
        fid.stddev = 0.0;
        fid.n = 1;
        report.metrics["fid"] = fid;
    }
    return report;
}

namespace {
std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

void write_report_json(const std::filesystem::path& path, const EvalReport& report) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["regime"] = report.regime;
    j["n_images"] = report.n_images;
    j["n_references"] = report.n_references;
    j["failures"] = report.failures;
    j["prompt_align_caveat"] = report.prompt_align_caveat;
    if (!report.config_echo.empty()) {
        auto echo = nlohmann::json::parse(report.config_echo, nullptr, /*allow_exceptions=*/false);
        j["config_echo"] = echo.is_discarded() ? nlohmann::json(report.config_echo) : echo;
    }
    nlohmann::json metrics;
    for (const auto& [name, stat] : report.metrics) {
        metrics[name] = {{"mean", stat.mean}, {"std", stat.stddev}, {"n", stat.n}};
    }
    j["metrics"] = metrics;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report json: " + path.string());
    out << j.dump(2) << "\n";
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report csv: " + path.string());
    out << "metric,mean,std,n\n";
    for (const auto& [name, stat] : report.metrics) {
        out << name << ',' << format_double(stat.mean) << ',' << format_double(stat.stddev) << ','
            << stat.n << "\n";
    }
}

}  // namespace hypnos
