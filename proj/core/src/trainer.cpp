#include "hypnos/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace hypnos {

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "hypnos") return TrainMode::hypnos;
    if (s == "dreambooth_baseline") return TrainMode::dreambooth_baseline;
    if (s == "ablation_no_perceptual") return TrainMode::ablation_no_perceptual;
    if (s == "ablation_no_ld") return TrainMode::ablation_no_ld;
    if (s == "ablation_ungated_perceptual") return TrainMode::ablation_ungated_perceptual;
    throw std::invalid_argument("unknown training mode: " + s);
}

std::string train_mode_to_string(TrainMode m) {
    switch (m) {
        case TrainMode::hypnos: return "hypnos";
        case TrainMode::dreambooth_baseline: return "dreambooth_baseline";
        case TrainMode::ablation_no_perceptual: return "ablation_no_perceptual";
        case TrainMode::ablation_no_ld: return "ablation_no_ld";
        case TrainMode::ablation_ungated_perceptual: return "ablation_ungated_perceptual";
    }
    throw std::logic_error("unreachable");
}

Trainer::Trainer(BackboneConfig backbone_cfg, DataConfig data_cfg,
                 LatentDiscriminator::Config ld_cfg, PerceptualEncoder::Config perc_cfg,
                 TrainConfig cfg)
    : cfg_(cfg),
      data_cfg_(std::move(data_cfg)),
      model_((backbone_cfg.seed = cfg.seed, backbone_cfg)),
      ld_((ld_cfg.lr = cfg.ld_lr, ld_cfg.pretrain_steps = cfg.ld_pretrain_steps, ld_cfg), cfg.seed),
      perc_(perc_cfg, cfg.seed),
      opt_denoiser_(cfg.lr),
      opt_text_(cfg.lr),
      opt_ld_(cfg.ld_lr),
      rng_(Rng(cfg.seed).fork(0x747261696EULL)) {
    cfg_.weights.validate(cfg_.total_steps);
}

LossWeights Trainer::effective_weights() const {
    LossWeights w = cfg_.weights;
    switch (cfg_.mode) {
        case TrainMode::hypnos:
            break;
        case TrainMode::dreambooth_baseline:
            w.lambda_p = 0.0;
            w.lambda_ld = 0.0;
            break;
        case TrainMode::ablation_no_perceptual:
            w.lambda_p = 0.0;
            break;
        case TrainMode::ablation_no_ld:
            w.lambda_ld = 0.0;
            break;
        case TrainMode::ablation_ungated_perceptual:
            w.s_p = cfg_.total_steps;
            break;
    }
    return w;
}

bool Trainer::ld_active() const { return effective_weights().lambda_ld > 0.0; }
bool Trainer::perceptual_active() const { return effective_weights().lambda_p > 0.0; }

void Trainer::prepare() {
    auto [inst, cls] = generate_synthetic_dataset(cfg_.seed, data_cfg_);
    instances_ = std::move(inst);
    classes_ = std::move(cls);
    // Pretrained in every mode: even without the perceptual term, the
    // evaluation embedder reads its block-4 features.
    perc_.pretrain();
    ld_sampler_.emplace(instances_, classes_,
                        [this](const ImageTensor& img) { return model_.encode(img); }, data_cfg_);
    if (ld_active() && cfg_.ld_pretrain_steps > 0) {
        Rng ld_rng = Rng(cfg_.seed).fork(0x6C647072ULL);
        ld_pretrain_ = pretrain_ld(ld_, *ld_sampler_, cfg_.ld_pretrain_steps, ld_rng);
    }
    prepared_ = true;
}

StepRecord Trainer::training_step(const InstanceSample& instance, const ClassSample& cls,
                                  int step) {
    if (!prepared_) throw std::logic_error("Trainer::prepare() must run before training_step");
    if (step >= cfg_.total_steps) throw std::invalid_argument("step beyond total_steps");
    const LossWeights w = effective_weights();

    const int t = rng_.uniform_int(1, model_.schedule().horizon());
    const Tensor z_i = model_.encode(instance.image);
    const Tensor z_p = model_.encode(cls.image);
    const Tensor eps_i = randn_tensor(z_i.shape(), rng_);
    const Tensor eps_p = randn_tensor(z_p.shape(), rng_);
    const Tensor z_it = model_.add_noise(z_i, t, eps_i);
    const Tensor z_pt = model_.add_noise(z_p, t, eps_p);

    nn::ParamBinder den_binder(model_.denoiser().params(), /*trainable=*/true);
    nn::ParamBinder text_binder(model_.text_encoder().params(), /*trainable=*/true);

    auto cond_i = model_.text_encoder().encode_graph(text_binder, instance.prompt);
    auto cond_p = model_.text_encoder().encode_graph(text_binder, cls.prompt);
    auto eps_hat_i = model_.denoiser().forward_graph(den_binder, ad::constant(z_it), t, cond_i);
    auto eps_hat_p = model_.denoiser().forward_graph(den_binder, ad::constant(z_pt), t, cond_p);

    auto r_graph = inverse_gaussian_active()
                       ? inverse_gaussian_graph(eps_hat_i, ad::constant(eps_i), w.sigma)
                       : ad::mse(eps_hat_i, ad::constant(eps_i));
    auto pp_graph = ad::mse(eps_hat_p, ad::constant(eps_p));

    // One-shot denoised latent for the image-level terms.
    ad::Var z0_hat;
    if (w.lambda_p > 0.0 || w.lambda_ld > 0.0) {
        const double ab = model_.schedule().alpha_bar(t);
        const double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
        z0_hat = ad::scale(ad::sub(ad::constant(z_it), ad::scale(eps_hat_i, sn)), 1.0 / sa);
    }

    ad::Var p_graph;
    const bool gate_open = step <= w.s_p;
    if (w.lambda_p > 0.0 && gate_open) {
        auto x_hat = model_.codec().decode_graph(z0_hat);
        p_graph = perceptual_graph(ad::constant(image_to_chw(instance.image)), x_hat, perc_,
                                   w.block_weights, step, w.s_p);
    }

    ad::Var ld_graph;
    if (w.lambda_ld > 0.0) {
        // Discriminator parameters enter as constants: the adversarial term
        // trains the denoiser through z0 only.
        nn::ParamBinder ld_binder(ld_.params(), /*trainable=*/false);
        auto score = ld_.forward_graph(ld_binder, z0_hat);
        ld_graph = ld_generator_graph(score);
    }

    ad::Var total_graph = ad::add(ad::scale(r_graph, w.lambda_r), ad::scale(pp_graph, w.lambda_pp));
    if (p_graph) total_graph = ad::add(total_graph, ad::scale(p_graph, w.lambda_p));
    if (ld_graph) total_graph = ad::add(total_graph, ad::scale(ld_graph, w.lambda_ld));

    const double r_v = r_graph->val.item();
    const double pp_v = pp_graph->val.item();
    const double p_v = p_graph ? p_graph->val.item() : 0.0;
    const double ld_v = ld_graph ? ld_graph->val.item() : 0.0;
    for (double v : {r_v, pp_v, p_v, ld_v})
        if (!std::isfinite(v))
            throw TrainingError("non-finite loss at step " + std::to_string(step), step,
                                last_finite_);
    StepRecord rec;
    rec.losses = total_loss(r_v, pp_v, p_v, ld_v, w, step);
    last_finite_ = rec.losses;

    ad::backward(total_graph);
    opt_denoiser_.step(model_.denoiser().params(), den_binder);
    opt_text_.step(model_.text_encoder().params(), text_binder);

    // Discriminator's own update: Table-A1 stream plus the current denoised
    // latent as an extra fake sample.
    if (w.lambda_ld > 0.0 && cfg_.ld_interleave > 0 && step % cfg_.ld_interleave == 0) {
        nn::ParamBinder dbind(ld_.params(), /*trainable=*/true);
        ad::Var real_sq, fake_sq;
        int n_real = 0, n_fake = 0;
        for (int i = 0; i < ld_.config().batch_size; ++i) {
            const LDItem item = ld_sampler_->draw(rng_);
            auto s = ld_.forward_graph(dbind, ad::constant(item.latent));
            if (item.real) {
                auto term = ad::mse(s, ad::constant(Tensor::full({1}, 1.0)));
                real_sq = real_sq ? ad::add(real_sq, term) : term;
                ++n_real;
            } else {
                auto term = ad::mse(s, ad::constant(Tensor::full({1}, 0.0)));
                fake_sq = fake_sq ? ad::add(fake_sq, term) : term;
                ++n_fake;
            }
        }
        {
            auto s = ld_.forward_graph(dbind, ad::constant(z0_hat->val));
            auto term = ad::mse(s, ad::constant(Tensor::full({1}, 0.0)));
            fake_sq = fake_sq ? ad::add(fake_sq, term) : term;
            ++n_fake;
        }
        ad::Var d_loss = ad::scale(fake_sq, 1.0 / n_fake);
        if (real_sq) d_loss = ad::add(d_loss, ad::scale(real_sq, 1.0 / n_real));
        rec.d_loss = d_loss->val.item();
        if (!std::isfinite(rec.d_loss))
            throw TrainingError("non-finite discriminator loss at step " + std::to_string(step),
                                step, last_finite_);
        ad::backward(d_loss);
        opt_ld_.step(ld_.params(), dbind);
    }
    return rec;
}

std::vector<StepRecord> Trainer::train() {
    if (!prepared_) prepare();
    std::vector<StepRecord> history;
    history.reserve(static_cast<size_t>(cfg_.total_steps));
    for (int step = 0; step < cfg_.total_steps; ++step) {
        auto [inst, cls] = sample_training_batch(instances_, classes_, rng_, data_cfg_);
        history.push_back(training_step(inst, cls, step));
    }
    return history;
}

CheckpointData Trainer::make_checkpoint(const std::string& config_json, int step) const {
    CheckpointData ckpt;
    ckpt.step = step;
    ckpt.config_json = config_json;
    store_to_keyspace(model_.denoiser().params(), ckpt.keyspaces["denoiser"]);
    store_to_keyspace(model_.text_encoder().params(), ckpt.keyspaces["text_encoder"]);
    store_to_keyspace(ld_.params(), ckpt.keyspaces["discriminator"]);
    store_to_keyspace(perc_.params(), ckpt.keyspaces["perceptual"]);
    return ckpt;
}

void Trainer::restore(const CheckpointData& ckpt) {
    keyspace_to_store(ckpt.keyspaces.at("denoiser"), model_.denoiser().params());
    keyspace_to_store(ckpt.keyspaces.at("text_encoder"), model_.text_encoder().params());
    keyspace_to_store(ckpt.keyspaces.at("discriminator"), ld_.params());
    keyspace_to_store(ckpt.keyspaces.at("perceptual"), perc_.params());
}

namespace {
void append_double(std::string& line, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    line += buf;
}
}  // namespace

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write loss csv: " + path.string());
    out << "step,r,pp,p,ld,total,d_loss\n";
    for (const auto& rec : history) {
        std::string line = std::to_string(rec.losses.step);
        for (double v : {rec.losses.r, rec.losses.pp, rec.losses.p, rec.losses.ld,
                         rec.losses.total, rec.d_loss}) {
            line += ',';
            append_double(line, v);
        }
        out << line << "\n";
    }
}

void write_ld_pretrain_csv(const std::filesystem::path& path, const LdPretrainResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write ld pretrain csv: " + path.string());
    out << "step,d_loss\n";
    for (size_t i = 0; i < result.loss_history.size(); ++i) {
        std::string line = std::to_string(i);
        line += ',';
        append_double(line, result.loss_history[i]);
        out << line << "\n";
    }
    std::string acc = "# holdout_accuracy=";
    append_double(acc, result.holdout_accuracy);
    out << acc << "\n";
}

}  // namespace hypnos
