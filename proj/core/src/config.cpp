#include "hypnos/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace hypnos {

using nlohmann::json;

namespace {

// Section reader with unknown-key detection. Every get() marks its key as
// expected; finish() reports anything the caller never asked for.
class Section {
public:
    Section(const json& j, std::string path, std::vector<std::string>& unknown)
        : j_(&j), path_(std::move(path)), unknown_(&unknown) {
        if (!j.is_object())
            throw ConfigError("config section '" + path_ + "' must be a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        expected_.push_back(key);
        auto it = j_->find(key);
        if (it == j_->end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + path_ + "." + key + "': " + e.what());
        }
    }

    const json* sub(const char* key) {
        expected_.push_back(key);
        auto it = j_->find(key);
        return it == j_->end() ? nullptr : &*it;
    }

    void finish() {
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            bool known = false;
            for (const auto& k : expected_)
                if (k == it.key()) {
                    known = true;
                    break;
                }
            if (!known) unknown_->push_back(path_.empty() ? it.key() : path_ + "." + it.key());
        }
    }

private:
    const json* j_;
    std::string path_;
    std::vector<std::string>* unknown_;
    std::vector<std::string> expected_;
};

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

namespace {

json block_weights_to_json(const std::vector<BlockWeight>& ws) {
    json arr = json::array();
    for (const auto& w : ws) arr.push_back({{"block", w.block}, {"weight", w.weight}});
    return arr;
}

std::vector<BlockWeight> block_weights_from_json(const json& arr, const std::string& path,
                                                 std::vector<std::string>& unknown) {
    if (!arr.is_array()) throw ConfigError("config key '" + path + "' must be an array");
    std::vector<BlockWeight> out;
    int i = 0;
    for (const auto& e : arr) {
        Section s(e, path + "[" + std::to_string(i) + "]", unknown);
        BlockWeight w{};
        s.get("block", w.block);
        s.get("weight", w.weight);
        s.finish();
        out.push_back(w);
        ++i;
    }
    return out;
}

json bundle_to_json(const PromptListBundle& b) {
    json j;
    j["image_types"] = b.image_types;
    j["backgrounds"] = b.backgrounds;
    j["styles_by_type"] = b.styles_by_type;
    return j;
}

}  // namespace

std::string run_config_echo(const RunConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    j["seed"] = cfg.seed;

    json data;
    data["image_size"] = cfg.data.image_size;
    data["n_instance"] = cfg.data.n_instance;
    data["n_class"] = cfg.data.n_class;
    data["instance_token"] = cfg.data.spec.instance_token;
    data["class_token"] = cfg.data.spec.class_token;
    data["background_placeholder"] = cfg.data.spec.background_placeholder;
    data["aug_prob"] = cfg.data.aug_prob;
    data["resize_frac"] = cfg.data.resize_frac;
    data["resize_scale_lo"] = cfg.data.resize_scale_lo;
    data["resize_scale_hi"] = cfg.data.resize_scale_hi;
    j["data"] = data;

    json backbone;
    backbone["horizon"] = cfg.backbone.horizon;
    backbone["alpha_floor"] = cfg.backbone.alpha_floor;
    backbone["sample_steps"] = cfg.backbone.sample_steps;
    backbone["z0_clip"] = cfg.backbone.z0_clip;
    backbone["codec"] = {{"image_size", cfg.backbone.codec.image_size},
                         {"patch", cfg.backbone.codec.patch},
                         {"latent_channels", cfg.backbone.codec.latent_channels},
                         {"latent_scale", cfg.backbone.codec.latent_scale}};
    backbone["denoiser"] = {{"hidden_channels", cfg.backbone.denoiser.hidden_channels},
                            {"blocks", cfg.backbone.denoiser.blocks},
                            {"time_dim", cfg.backbone.denoiser.time_dim},
                            {"cond_dim", cfg.backbone.denoiser.cond_dim},
                            {"emb_dim", cfg.backbone.denoiser.emb_dim}};
    backbone["text"] = {{"vocab_size", cfg.backbone.text.vocab_size},
                        {"embed_dim", cfg.backbone.text.embed_dim}};
    j["backbone"] = backbone;

    json losses;
    losses["lambda_r"] = cfg.losses.lambda_r;
    losses["lambda_pp"] = cfg.losses.lambda_pp;
    losses["lambda_p"] = cfg.losses.lambda_p;
    losses["lambda_ld"] = cfg.losses.lambda_ld;
    losses["sigma"] = cfg.losses.sigma;
    losses["s_p"] = cfg.losses.s_p;
    losses["block_weights"] = block_weights_to_json(cfg.losses.block_weights);
    losses["perceptual"] = {{"channels", cfg.perceptual.channels},
                            {"pretrain_classes", cfg.perceptual.pretrain_classes},
                            {"pretrain_steps", cfg.perceptual.pretrain_steps},
                            {"pretrain_lr", cfg.perceptual.pretrain_lr}};
    j["losses"] = losses;

    json disc;
    disc["patch"] = cfg.discriminator.patch;
    disc["embed_dim"] = cfg.discriminator.embed_dim;
    disc["heads"] = cfg.discriminator.heads;
    disc["blocks"] = cfg.discriminator.blocks;
    disc["stem_expand"] = cfg.discriminator.stem_expand;
    disc["lr"] = cfg.discriminator.lr;
    disc["pretrain_steps"] = cfg.discriminator.pretrain_steps;
    disc["batch_size"] = cfg.discriminator.batch_size;
    j["discriminator"] = disc;

    json trainer;
    trainer["total_steps"] = cfg.trainer.total_steps;
    trainer["ld_pretrain_steps"] = cfg.trainer.ld_pretrain_steps;
    trainer["lr"] = cfg.trainer.lr;
    trainer["ld_lr"] = cfg.trainer.ld_lr;
    trainer["ld_interleave"] = cfg.trainer.ld_interleave;
    trainer["mode"] = train_mode_to_string(cfg.trainer.mode);
    j["trainer"] = trainer;

    json eval;
    eval["n_images"] = cfg.eval.n_images;
    eval["sample_steps"] = cfg.eval.sample_steps;
    eval["regime"] = eval_regime_to_string(cfg.eval.regime);
    eval["bundle"] = bundle_to_json(cfg.eval.bundle);
    eval["lpips_weights"] = block_weights_to_json(cfg.eval.lpips_weights);
    j["eval"] = eval;

    return j.dump(2);
}

std::uint64_t run_config_hash(const RunConfig& cfg) {
    const std::string echo = run_config_echo(cfg);
    return fnv1a64(echo.data(), echo.size());
}

RunConfig parse_run_config(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON");

    RunConfig cfg;
    std::vector<std::string> unknown;
    Section root(j, "", unknown);
    root.get("schema_version", cfg.schema_version);
    if (cfg.schema_version != 1)
        throw ConfigError("unsupported config schema_version " +
                          std::to_string(cfg.schema_version));
    root.get("seed", cfg.seed);

    if (const json* d = root.sub("data")) {
        Section s(*d, "data", unknown);
        s.get("image_size", cfg.data.image_size);
        s.get("n_instance", cfg.data.n_instance);
        s.get("n_class", cfg.data.n_class);
        s.get("instance_token", cfg.data.spec.instance_token);
        s.get("class_token", cfg.data.spec.class_token);
        s.get("background_placeholder", cfg.data.spec.background_placeholder);
        s.get("aug_prob", cfg.data.aug_prob);
        s.get("resize_frac", cfg.data.resize_frac);
        s.get("resize_scale_lo", cfg.data.resize_scale_lo);
        s.get("resize_scale_hi", cfg.data.resize_scale_hi);
        s.finish();
    }

    if (const json* b = root.sub("backbone")) {
        Section s(*b, "backbone", unknown);
        s.get("horizon", cfg.backbone.horizon);
        s.get("alpha_floor", cfg.backbone.alpha_floor);
        s.get("z0_clip", cfg.backbone.z0_clip);
        s.get("sample_steps", cfg.backbone.sample_steps);
        if (const json* c = s.sub("codec")) {
            Section sc(*c, "backbone.codec", unknown);
            sc.get("image_size", cfg.backbone.codec.image_size);
            sc.get("patch", cfg.backbone.codec.patch);
            sc.get("latent_channels", cfg.backbone.codec.latent_channels);
            sc.get("latent_scale", cfg.backbone.codec.latent_scale);
            sc.finish();
        }
        if (const json* d2 = s.sub("denoiser")) {
            Section sd(*d2, "backbone.denoiser", unknown);
            sd.get("hidden_channels", cfg.backbone.denoiser.hidden_channels);
            sd.get("blocks", cfg.backbone.denoiser.blocks);
            sd.get("time_dim", cfg.backbone.denoiser.time_dim);
            sd.get("cond_dim", cfg.backbone.denoiser.cond_dim);
            sd.get("emb_dim", cfg.backbone.denoiser.emb_dim);
            sd.finish();
        }
        if (const json* t = s.sub("text")) {
            Section st(*t, "backbone.text", unknown);
            st.get("vocab_size", cfg.backbone.text.vocab_size);
            st.get("embed_dim", cfg.backbone.text.embed_dim);
            st.finish();
        }
        s.finish();
    }

    if (const json* l = root.sub("losses")) {
        Section s(*l, "losses", unknown);
        s.get("lambda_r", cfg.losses.lambda_r);
        s.get("lambda_pp", cfg.losses.lambda_pp);
        s.get("lambda_p", cfg.losses.lambda_p);
        s.get("lambda_ld", cfg.losses.lambda_ld);
        s.get("sigma", cfg.losses.sigma);
        s.get("s_p", cfg.losses.s_p);
        if (const json* bw = s.sub("block_weights"))
            cfg.losses.block_weights = block_weights_from_json(*bw, "losses.block_weights", unknown);
        if (const json* p = s.sub("perceptual")) {
            Section sp(*p, "losses.perceptual", unknown);
            sp.get("channels", cfg.perceptual.channels);
            sp.get("pretrain_classes", cfg.perceptual.pretrain_classes);
            sp.get("pretrain_steps", cfg.perceptual.pretrain_steps);
            sp.get("pretrain_lr", cfg.perceptual.pretrain_lr);
            sp.finish();
        }
        s.finish();
    }

    if (const json* d = root.sub("discriminator")) {
        Section s(*d, "discriminator", unknown);
        s.get("patch", cfg.discriminator.patch);
        s.get("embed_dim", cfg.discriminator.embed_dim);
        s.get("heads", cfg.discriminator.heads);
        s.get("blocks", cfg.discriminator.blocks);
        s.get("stem_expand", cfg.discriminator.stem_expand);
        s.get("lr", cfg.discriminator.lr);
        s.get("pretrain_steps", cfg.discriminator.pretrain_steps);
        s.get("batch_size", cfg.discriminator.batch_size);
        s.finish();
    }

    if (const json* t = root.sub("trainer")) {
        Section s(*t, "trainer", unknown);
        s.get("total_steps", cfg.trainer.total_steps);
        s.get("ld_pretrain_steps", cfg.trainer.ld_pretrain_steps);
        s.get("lr", cfg.trainer.lr);
        s.get("ld_lr", cfg.trainer.ld_lr);
        s.get("ld_interleave", cfg.trainer.ld_interleave);
        std::string mode = train_mode_to_string(cfg.trainer.mode);
        s.get("mode", mode);
        try {
            cfg.trainer.mode = train_mode_from_string(mode);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config key 'trainer.mode': ") + e.what());
        }
        s.finish();
    }

    if (const json* e = root.sub("eval")) {
        Section s(*e, "eval", unknown);
        s.get("n_images", cfg.eval.n_images);
        s.get("sample_steps", cfg.eval.sample_steps);
        std::string regime = eval_regime_to_string(cfg.eval.regime);
        s.get("regime", regime);
        try {
            cfg.eval.regime = eval_regime_from_string(regime);
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(std::string("config key 'eval.regime': ") + ex.what());
        }
        if (const json* bd = s.sub("bundle")) {
            Section sb(*bd, "eval.bundle", unknown);
            sb.get("image_types", cfg.eval.bundle.image_types);
            sb.get("backgrounds", cfg.eval.bundle.backgrounds);
            sb.get("styles_by_type", cfg.eval.bundle.styles_by_type);
            sb.finish();
        }
        if (const json* lw = s.sub("lpips_weights"))
            cfg.eval.lpips_weights = block_weights_from_json(*lw, "eval.lpips_weights", unknown);
        s.finish();
    }
    root.finish();

    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }

    // The run seed fans out into every seeded component.
    cfg.backbone.seed = cfg.seed;
    cfg.trainer.seed = cfg.seed;
    cfg.eval.seed = cfg.seed;
    // Shared knobs stay consistent across sections.
    cfg.backbone.codec.image_size = cfg.data.image_size;
    cfg.perceptual.image_size = cfg.data.image_size;
    cfg.discriminator.latent_channels = cfg.backbone.codec.latent_channels;
    cfg.discriminator.latent_hw = cfg.backbone.codec.image_size / cfg.backbone.codec.patch;
    cfg.backbone.denoiser.latent_channels = cfg.backbone.codec.latent_channels;
    cfg.backbone.denoiser.latent_hw = cfg.backbone.codec.image_size / cfg.backbone.codec.patch;
    cfg.backbone.denoiser.cond_dim = cfg.backbone.text.embed_dim;
    cfg.trainer.weights = cfg.losses;
    cfg.trainer.ld_lr = cfg.discriminator.lr;
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string apply_config_override(const std::string& json_text,
                                  const std::string& override_spec) {
    const auto eq = override_spec.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like section.key=value: " + override_spec);
    const std::string path = override_spec.substr(0, eq);
    const std::string value_text = override_spec.substr(eq + 1);
    if (path.empty()) throw ConfigError("override has an empty key path: " + override_spec);

    json j = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON");

    json value = json::parse(value_text, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) value = value_text;  // bare strings stay strings

    json* node = &j;
    size_t start = 0;
    while (true) {
        const size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ConfigError("override has an empty path segment: " + override_spec);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
    return j.dump(2);
}

}  // namespace hypnos
