// hypnos: command-line surface for the whole pipeline.
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hypnos/config.hpp"

namespace {

using namespace hypnos;

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + p.string());
    out << text;
}

// Config text from --config file (or defaults) with --set overrides applied.
std::string resolve_config_text(const std::string& config_path,
                                const std::vector<std::string>& overrides) {
    std::string text = config_path.empty() ? run_config_echo(default_run_config())
                                           : read_text(config_path);
    for (const auto& o : overrides) text = apply_config_override(text, o);
    return text;
}

std::filesystem::path run_root() {
    if (const char* env = std::getenv("HYPNOS_RUN_ROOT")) return env;
    return "runs";
}

int cmd_calibrate_sigma(double a) {
    const auto t0 = std::chrono::steady_clock::now();
    const SigmaCalibration cal = calibrate_sigma(a);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    std::printf("sigma* = %.6f\n", cal.sigma);
    std::printf("objective = %.10g\n", cal.objective);
    std::printf("elapsed_ms = %lld\n", static_cast<long long>(ms));
    return 0;
}

int cmd_make_data(const std::string& config_path, const std::vector<std::string>& overrides,
                  const std::string& out_dir) {
    const std::string text = resolve_config_text(config_path, overrides);
    const RunConfig cfg = parse_run_config(text);
    auto [instances, classes] = generate_synthetic_dataset(cfg.seed, cfg.data);
    std::filesystem::create_directories(out_dir);
    write_dataset(out_dir, instances, classes, cfg.seed, cfg.data);
    std::printf("wrote %zu instance and %zu class images to %s\n", instances.size(),
                classes.size(), out_dir.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::string out_dir) {
    const std::string text = resolve_config_text(config_path, overrides);
    const RunConfig cfg = parse_run_config(text);
    const std::string echo = run_config_echo(cfg);

    if (out_dir.empty()) {
        out_dir = (run_root() / (train_mode_to_string(cfg.trainer.mode) + "_seed" +
                                 std::to_string(cfg.seed)))
                      .string();
    }
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);

    Trainer trainer(cfg.backbone, cfg.data, cfg.discriminator, cfg.perceptual, cfg.trainer);
    trainer.prepare();
    const auto history = trainer.train();

    write_text(dir / "config.json", echo + "\n");
    write_loss_csv(dir / "loss_history.csv", history);
    write_ld_pretrain_csv(dir / "ld_pretrain.csv", trainer.ld_pretrain_result());
    save_checkpoint(trainer.make_checkpoint(echo, cfg.trainer.total_steps),
                    dir / "checkpoint.bin");
    std::printf("run complete: %s (%d steps, final total loss %.6g)\n", out_dir.c_str(),
                cfg.trainer.total_steps, history.back().losses.total);
    return 0;
}

// Rebuilds the model stack recorded in a checkpoint's config echo.
struct LoadedRun {
    RunConfig cfg;
    CheckpointData ckpt;
};

LoadedRun load_run(const std::string& checkpoint_path) {
    LoadedRun run;
    run.ckpt = load_checkpoint(checkpoint_path);
    run.cfg = parse_run_config(run.ckpt.config_json);
    return run;
}

int cmd_generate(const std::string& checkpoint_path, const std::string& prompt,
                 std::uint64_t seed, int n, const std::string& out_dir) {
    const LoadedRun run = load_run(checkpoint_path);
    DiffusionModel model(run.cfg.backbone);
    keyspace_to_store(run.ckpt.keyspaces.at("denoiser"), model.denoiser().params());
    keyspace_to_store(run.ckpt.keyspaces.at("text_encoder"), model.text_encoder().params());

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    nlohmann::json manifest;
    manifest["prompt"] = prompt;
    manifest["seed"] = seed;
    manifest["sample_steps"] = run.cfg.backbone.sample_steps;
    manifest["checkpoint"] = checkpoint_path;
    manifest["config_hash"] = run_config_hash(run.cfg);
    nlohmann::json files = nlohmann::json::array();
    for (int i = 0; i < n; ++i) {
        const std::uint64_t img_seed = Rng(seed).fork(0x67656E00ULL + std::uint64_t(i)).next_u64();
        const ImageTensor img = model.sample(prompt, run.cfg.backbone.sample_steps, img_seed);
        char name[32];
        std::snprintf(name, sizeof(name), "image_%03d.ppm", i);
        write_ppm(img, dir / name);
        files.push_back(name);
    }
    manifest["files"] = files;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    std::printf("wrote %d images to %s\n", n, out_dir.c_str());
    return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& regime,
                 const std::string& config_path, const std::vector<std::string>& overrides,
                 int n_images, const std::string& out_dir) {
    const LoadedRun run = load_run(checkpoint_path);
    RunConfig cfg = run.cfg;
    if (!config_path.empty() || !overrides.empty())
        cfg = parse_run_config(resolve_config_text(
            config_path.empty() ? std::string() : config_path, overrides));
    cfg.eval.regime = eval_regime_from_string(regime);
    if (n_images > 0) cfg.eval.n_images = n_images;

    DiffusionModel model(cfg.backbone);
    keyspace_to_store(run.ckpt.keyspaces.at("denoiser"), model.denoiser().params());
    keyspace_to_store(run.ckpt.keyspaces.at("text_encoder"), model.text_encoder().params());
    PerceptualEncoder perc(cfg.perceptual, cfg.seed);
    keyspace_to_store(run.ckpt.keyspaces.at("perceptual"), perc.params());

    auto [instances, classes] = generate_synthetic_dataset(cfg.seed, cfg.data);
    (void)classes;
    const EvalReport report =
        evaluate(model, perc, instances, cfg.data.spec, cfg.eval, run_config_echo(cfg));

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_report_json(dir / ("report_" + regime + ".json"), report);
    write_report_csv(dir / ("report_" + regime + ".csv"), report);
    std::printf("evaluation (%s) complete: %d images x %d references, %d failures\n",
                regime.c_str(), report.n_images, report.n_references, report.failures);
    for (const auto& [name, stat] : report.metrics)
        std::printf("  %-12s mean=%.6g std=%.6g n=%lld\n", name.c_str(), stat.mean, stat.stddev,
                    static_cast<long long>(stat.n));
    return 0;
}

int cmd_report(const std::string& run_dir) {
    const std::filesystem::path dir(run_dir);
    if (!std::filesystem::exists(dir / "config.json"))
        throw ConfigError("not a run directory (missing config.json): " + run_dir);
    const RunConfig cfg = parse_run_config(read_text(dir / "config.json"));
    std::printf("run: %s\n", run_dir.c_str());
    std::printf("mode: %s  seed: %llu  config_hash: %016llx\n",
                train_mode_to_string(cfg.trainer.mode).c_str(),
                static_cast<unsigned long long>(cfg.seed),
                static_cast<unsigned long long>(run_config_hash(cfg)));
    std::ifstream loss(dir / "loss_history.csv");
    if (loss) {
        std::string line, last, header;
        std::getline(loss, header);
        int rows = 0;
        while (std::getline(loss, line))
            if (!line.empty()) {
                last = line;
                ++rows;
            }
        std::printf("loss_history: %d steps; last row: %s\n", rows, last.c_str());
    }
    for (const char* name : {"report_invariant.json", "report_varying.json"}) {
        if (std::filesystem::exists(dir / name)) {
            const auto j = nlohmann::json::parse(read_text(dir / name));
            std::printf("%s:\n", name);
            for (const auto& [metric, stat] : j.at("metrics").items())
                std::printf("  %-12s mean=%.6g std=%.6g n=%lld\n", metric.c_str(),
                            stat.at("mean").get<double>(), stat.at("std").get<double>(),
                            stat.at("n").get<long long>());
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hypnos: foreground-focused diffusion finetuning on a toy backbone"};
    app.require_subcommand(1);

    double sigma_a = 1.0;
    auto* sc_sigma = app.add_subcommand("calibrate-sigma", "fit the reconstruction-loss sigma");
    sc_sigma->add_option("--a", sigma_a, "upper integration limit (must be > 0)");

    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    auto add_config_opts = [&](CLI::App* sc) {
        sc->add_option("--config", config_path, "run configuration JSON file");
        sc->add_option("--set", overrides, "override section.key=value (repeatable)");
    };

    auto* sc_data = app.add_subcommand("make-data", "write the synthetic dataset");
    add_config_opts(sc_data);
    sc_data->add_option("--out", out_dir, "output directory")->required();

    auto* sc_train = app.add_subcommand("train", "run the finetuning loop");
    add_config_opts(sc_train);
    sc_train->add_option("--out", out_dir, "run directory (default under HYPNOS_RUN_ROOT)");

    std::string checkpoint_path, prompt, regime = "invariant", run_dir;
    std::uint64_t gen_seed = 42;
    int gen_n = 1, eval_n = 0;
    auto* sc_gen = app.add_subcommand("generate", "sample images from a checkpoint");
    sc_gen->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    sc_gen->add_option("--prompt", prompt, "text prompt")->required();
    sc_gen->add_option("--seed", gen_seed, "sampling seed");
    sc_gen->add_option("--n", gen_n, "number of images");
    sc_gen->add_option("--out", out_dir, "output directory")->required();

    auto* sc_eval = app.add_subcommand("evaluate", "run an evaluation regime");
    sc_eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    sc_eval->add_option("--regime", regime, "invariant | varying");
    sc_eval->add_option("--n-images", eval_n, "number of generated images (default from config)");
    add_config_opts(sc_eval);
    sc_eval->add_option("--out", out_dir, "output directory")->required();

    auto* sc_report = app.add_subcommand("report", "summarize a run directory");
    sc_report->add_option("--run", run_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc_sigma->parsed()) {
            if (sigma_a <= 0.0) {
                std::fprintf(stderr, "error: --a must be > 0\n");
                return 1;
            }
            return cmd_calibrate_sigma(sigma_a);
        }
        if (sc_data->parsed()) return cmd_make_data(config_path, overrides, out_dir);
        if (sc_train->parsed()) return cmd_train(config_path, overrides, out_dir);
        if (sc_gen->parsed())
            return cmd_generate(checkpoint_path, prompt, gen_seed, gen_n, out_dir);
        if (sc_eval->parsed())
            return cmd_evaluate(checkpoint_path, regime, config_path, overrides, eval_n, out_dir);
        if (sc_report->parsed()) return cmd_report(run_dir);
    } catch (const hypnos::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    }
    return 1;
}
