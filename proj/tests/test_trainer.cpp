#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hypnos/config.hpp"

using namespace hypnos;

namespace {

// Small fast fixture shared by the loop tests.
RunConfig small_config(TrainMode mode) {
    RunConfig cfg = default_run_config();
    cfg.trainer.total_steps = 6;
    cfg.trainer.ld_pretrain_steps = 8;
    cfg.trainer.mode = mode;
    cfg.losses.s_p = 4;
    cfg.trainer.weights = cfg.losses;
    cfg.perceptual.pretrain_steps = 20;
    return cfg;
}

Trainer make_trainer(const RunConfig& cfg) {
    return Trainer(cfg.backbone, cfg.data, cfg.discriminator, cfg.perceptual, cfg.trainer);
}

}  // namespace

TEST_CASE("mode algebra selects the right loss terms") {
    auto w = [](TrainMode m) {
        return make_trainer(small_config(m)).effective_weights();
    };
    CHECK(w(TrainMode::hypnos).lambda_p == 0.003);
    CHECK(w(TrainMode::hypnos).lambda_ld == 0.5);
    CHECK(w(TrainMode::dreambooth_baseline).lambda_p == 0.0);
    CHECK(w(TrainMode::dreambooth_baseline).lambda_ld == 0.0);
    CHECK(w(TrainMode::ablation_no_perceptual).lambda_p == 0.0);
    CHECK(w(TrainMode::ablation_no_perceptual).lambda_ld == 0.5);
    CHECK(w(TrainMode::ablation_no_ld).lambda_ld == 0.0);
    CHECK(w(TrainMode::ablation_no_ld).lambda_p == 0.003);
    CHECK(w(TrainMode::ablation_ungated_perceptual).s_p == 6);

    auto t = make_trainer(small_config(TrainMode::dreambooth_baseline));
    CHECK_FALSE(t.inverse_gaussian_active());
    CHECK_FALSE(t.ld_active());
    CHECK(make_trainer(small_config(TrainMode::hypnos)).inverse_gaussian_active());
}

TEST_CASE("hypnos mode: finite losses, gate, frozen codec, histories") {
    const RunConfig cfg = small_config(TrainMode::hypnos);
    Trainer trainer = make_trainer(cfg);
    const std::uint64_t codec_hash_before = trainer.codec_hash();
    trainer.prepare();
    const auto history = trainer.train();
    REQUIRE(history.size() == 6);
    for (const auto& rec : history) {
        CHECK(std::isfinite(rec.losses.total));
        CHECK(std::isfinite(rec.d_loss));
        CHECK(rec.losses.r >= 0.0);
        CHECK(rec.losses.pp >= 0.0);
    }
    // s_p = 4: steps 5 onward carry exactly zero perceptual loss.
    for (const auto& rec : history)
        if (rec.losses.step > 4) CHECK(rec.losses.p == 0.0);
    CHECK(trainer.codec_hash() == codec_hash_before);
    CHECK(trainer.ld_pretrain_result().loss_history.size() == 8);
}

TEST_CASE("ablation modes zero their columns") {
    {
        Trainer t = make_trainer(small_config(TrainMode::ablation_no_perceptual));
        for (const auto& rec : t.train()) CHECK(rec.losses.p == 0.0);
    }
    {
        Trainer t = make_trainer(small_config(TrainMode::ablation_no_ld));
        for (const auto& rec : t.train()) {
            CHECK(rec.losses.ld == 0.0);
            CHECK(rec.d_loss == 0.0);  // no discriminator updates at all
        }
    }
}

TEST_CASE("discriminator parameters only change via its own optimizer") {
    RunConfig cfg = small_config(TrainMode::hypnos);
    cfg.trainer.ld_interleave = 0;  // generator steps only
    cfg.trainer.ld_pretrain_steps = 0;
    Trainer trainer = make_trainer(cfg);
    trainer.prepare();
    const std::uint64_t before = trainer.discriminator().params().byte_hash();
    Rng rng(1);
    auto [inst, cls] = sample_training_batch(trainer.instances(), trainer.classes(), rng, cfg.data);
    trainer.training_step(inst, cls, 1);
    // The adversarial term flowed through the discriminator, but with the
    // interleave disabled its parameters must be bit-identical.
    CHECK(trainer.discriminator().params().byte_hash() == before);
}

TEST_CASE("checkpoint round trip restores training state") {
    const RunConfig cfg = small_config(TrainMode::hypnos);
    Trainer trainer = make_trainer(cfg);
    trainer.prepare();
    trainer.train();
    const CheckpointData ckpt = trainer.make_checkpoint(run_config_echo(cfg), 6);
    const auto path = std::filesystem::temp_directory_path() / "hypnos_trainer_ckpt.bin";
    save_checkpoint(ckpt, path);

    Trainer other = make_trainer(cfg);
    other.restore(load_checkpoint(path));
    CHECK(other.model().denoiser().params().byte_hash() ==
          trainer.model().denoiser().params().byte_hash());
    CHECK(other.discriminator().params().byte_hash() ==
          trainer.discriminator().params().byte_hash());
    CHECK(other.perceptual().params().byte_hash() ==
          trainer.perceptual().params().byte_hash());
    std::filesystem::remove(path);
}

TEST_CASE("reruns are byte-identical; different seeds diverge") {
    auto run_hash = [](std::uint64_t seed) {
        RunConfig cfg = small_config(TrainMode::hypnos);
        cfg.seed = seed;
        cfg.backbone.seed = seed;
        cfg.trainer.seed = seed;
        Trainer t = make_trainer(cfg);
        const auto history = t.train();
        const auto path = std::filesystem::temp_directory_path() /
                          ("hypnos_det_" + std::to_string(seed) + ".csv");
        write_loss_csv(path, history);
        std::ifstream f(path, std::ios::binary);
        const std::string bytes((std::istreambuf_iterator<char>(f)), {});
        std::filesystem::remove(path);
        return std::pair{fnv1a64(bytes.data(), bytes.size()),
                         t.model().denoiser().params().byte_hash()};
    };
    const auto a = run_hash(42);
    const auto b = run_hash(42);
    const auto c = run_hash(43);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("loss CSV format") {
    RunConfig cfg = small_config(TrainMode::hypnos);
    Trainer t = make_trainer(cfg);
    const auto history = t.train();
    const auto path = std::filesystem::temp_directory_path() / "hypnos_loss_fmt.csv";
    write_loss_csv(path, history);
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header == "step,r,pp,p,ld,total,d_loss");
    int rows = 0;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6);
    std::filesystem::remove(path);
}
