#include "hypnos/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace hypnos {

std::vector<PaletteColor> default_palette() {
    return {
        {"white", {1.0, 1.0, 1.0}}, {"black", {0.0, 0.0, 0.0}}, {"gray", {0.5, 0.5, 0.5}},
        {"red", {0.8, 0.1, 0.1}},   {"green", {0.1, 0.7, 0.2}}, {"blue", {0.15, 0.3, 0.85}},
    };
}

SpriteParams instance_sprite_params(std::uint64_t seed) {
    // The one fixed subject of the run; derived from the seed so different
    // runs can have different subjects while a given run is reproducible.
    Rng rng = Rng(seed).fork(0x696E7374ULL);
    SpriteParams sp;
    sp.cx = 0.5;
    sp.cy = 0.56;
    sp.half_w = rng.uniform(0.16, 0.20);
    sp.half_h = rng.uniform(0.20, 0.24);
    sp.cap_radius = rng.uniform(0.10, 0.13);
    sp.corner_radius = 0.05;
    sp.stripes = rng.uniform_int(3, 5);
    sp.body_color = {rng.uniform(0.55, 0.9), rng.uniform(0.25, 0.5), rng.uniform(0.1, 0.3)};
    sp.accent_color = {rng.uniform(0.1, 0.3), rng.uniform(0.3, 0.6), rng.uniform(0.55, 0.9)};
    sp.cap_color = {rng.uniform(0.6, 0.9), rng.uniform(0.6, 0.9), rng.uniform(0.2, 0.45)};
    return sp;
}

SpriteParams random_sprite_params(Rng& rng) {
    SpriteParams sp;
    sp.cx = rng.uniform(0.4, 0.6);
    sp.cy = rng.uniform(0.48, 0.62);
    sp.half_w = rng.uniform(0.12, 0.24);
    sp.half_h = rng.uniform(0.16, 0.28);
    sp.cap_radius = rng.uniform(0.08, 0.15);
    sp.corner_radius = rng.uniform(0.03, 0.07);
    sp.stripes = rng.uniform_int(2, 6);
    auto col = [&] { return Rgb{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)}; };
    sp.body_color = col();
    sp.accent_color = col();
    sp.cap_color = col();
    return sp;
}

namespace {

// Signed inside test for the rounded rectangle body.
bool inside_body(const SpriteParams& sp, double x, double y) {
    const double dx = std::max(std::abs(x - sp.cx) - (sp.half_w - sp.corner_radius), 0.0);
    const double dy = std::max(std::abs(y - sp.cy) - (sp.half_h - sp.corner_radius), 0.0);
    return dx * dx + dy * dy <= sp.corner_radius * sp.corner_radius;
}

bool inside_cap(const SpriteParams& sp, double x, double y) {
    const double cy = sp.cy - sp.half_h - sp.cap_radius * 0.6;
    const double dx = x - sp.cx, dy = y - cy;
    return dx * dx + dy * dy <= sp.cap_radius * sp.cap_radius;
}

}  // namespace

void render_sprite(const SpriteParams& sp, ImageTensor& img, Mask& mask) {
    const int n = img.height();
    for (int yy = 0; yy < n; ++yy)
        for (int xx = 0; xx < n; ++xx) {
            const double x = (xx + 0.5) / n, y = (yy + 0.5) / n;
            const bool body = inside_body(sp, x, y);
            const bool cap = inside_cap(sp, x, y);
            if (!body && !cap) continue;
            mask.at(yy, xx) = 1;
            if (cap && !body) {
                img.set_rgb(yy, xx, sp.cap_color);
            } else {
                // horizontal stripe texture inside the body
                const double rel = (y - (sp.cy - sp.half_h)) / (2.0 * sp.half_h);
                const int band = static_cast<int>(std::floor(rel * sp.stripes * 2.0));
                img.set_rgb(yy, xx, band % 2 == 0 ? sp.body_color : sp.accent_color);
            }
        }
}

ImageTensor render_background(Rng& rng, int size) {
    // Smooth two-color gradient with a low-frequency tint; smooth content
    // keeps the analytic codec near-lossless.
    const Rgb a{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    const Rgb b{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    const double fx = std::cos(angle), fy = std::sin(angle);
    const double wobble = rng.uniform(0.5, 2.0), phase = rng.uniform(0.0, 2.0 * M_PI);
    ImageTensor img(size, size);
    for (int yy = 0; yy < size; ++yy)
        for (int xx = 0; xx < size; ++xx) {
            const double x = (xx + 0.5) / size, y = (yy + 0.5) / size;
            double u = 0.5 + 0.5 * (fx * (x - 0.5) + fy * (y - 0.5)) * 2.0;
            u = std::clamp(u + 0.08 * std::sin(wobble * 2.0 * M_PI * (x + y) + phase), 0.0, 1.0);
            for (int c = 0; c < 3; ++c)
                img.at(yy, xx, c) = std::clamp(a[size_t(c)] * (1 - u) + b[size_t(c)] * u, 0.0, 1.0);
        }
    return img;
}

std::pair<std::vector<InstanceSample>, std::vector<ClassSample>>
generate_synthetic_dataset(std::uint64_t seed, const DataConfig& cfg) {
    if (cfg.n_class < cfg.n_instance)
        throw std::invalid_argument("n_class must be >= n_instance");
    Rng rng = Rng(seed).fork(0x64617461ULL);
    const SpriteParams inst = instance_sprite_params(seed);

    std::vector<InstanceSample> instances;
    for (int i = 0; i < cfg.n_instance; ++i) {
        InstanceSample s;
        s.image = render_background(rng, cfg.image_size);
        s.mask = Mask(cfg.image_size, cfg.image_size);
        render_sprite(inst, s.image, s.mask);
        s.tag = AugTag{AugTag::original, {}, 1.0};
        s.prompt = build_instance_prompt(cfg.spec, s.tag);
        instances.push_back(std::move(s));
    }

    std::vector<ClassSample> classes;
    for (int i = 0; i < cfg.n_class; ++i) {
        ClassSample s;
        s.image = render_background(rng, cfg.image_size);
        Mask unused(cfg.image_size, cfg.image_size);
        render_sprite(random_sprite_params(rng), s.image, unused);
        s.prompt = build_class_prompt(cfg.spec);
        classes.push_back(std::move(s));
    }
    return {std::move(instances), std::move(classes)};
}

InstanceSample replace_background(const InstanceSample& sample, const PaletteColor& color,
                                  const SubjectSpec& spec) {
    InstanceSample out = sample;
    for (int y = 0; y < out.image.height(); ++y)
        for (int x = 0; x < out.image.width(); ++x)
            if (!out.mask.at(y, x)) out.image.set_rgb(y, x, color.rgb);
    out.tag = AugTag{AugTag::recolored, color, 1.0};
    out.prompt = build_instance_prompt(spec, out.tag);
    return out;
}

InstanceSample resize_foreground(const InstanceSample& sample, double scale,
                                 const SubjectSpec& spec) {
    if (scale < 0.5 || scale > 1.0)
        throw std::invalid_argument("resize_foreground: scale must be in [0.5, 1.0]");
    if (sample.tag.kind == AugTag::original)
        throw std::invalid_argument("resize_foreground: sample must be background-recolored first");
    const int n = sample.image.height();

    // Foreground centroid.
    double cy = 0.0, cx = 0.0;
    std::int64_t area = sample.mask.area();
    if (area == 0) return sample;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            if (sample.mask.at(y, x)) {
                cy += y;
                cx += x;
            }
    cy /= static_cast<double>(area);
    cx /= static_cast<double>(area);

    const Rgb bg = sample.tag.color.rgb;
    InstanceSample out = sample;
    out.mask = Mask(n, n);
    // Mask-weighted bilinear sampling; background never bleeds into the
    // rescaled foreground colors.
    auto sample_fg = [&](double sy, double sx, double& wsum, Rgb& acc) {
        const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
        const double fy = sy - y0, fx = sx - x0;
        const double w[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
        const int oy[4] = {0, 0, 1, 1}, ox[4] = {0, 1, 0, 1};
        double msum = 0.0;
        wsum = 0.0;
        acc = {0, 0, 0};
        for (int k = 0; k < 4; ++k) {
            const int y = y0 + oy[k], x = x0 + ox[k];
            if (y < 0 || y >= n || x < 0 || x >= n) continue;
            msum += w[k];
            if (!sample.mask.at(y, x)) continue;
            wsum += w[k];
            for (int c = 0; c < 3; ++c) acc[size_t(c)] += w[k] * sample.image.at(y, x, c);
        }
        return msum > 0.0 ? wsum / msum : 0.0;  // interpolated mask coverage
    };

    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double sy = cy + (y - cy) / scale;
            const double sx = cx + (x - cx) / scale;
            double wsum;
            Rgb acc;
            const double coverage = (sy < -1 || sy > n || sx < -1 || sx > n)
                                        ? 0.0
                                        : sample_fg(sy, sx, wsum, acc);
            if (coverage >= 0.5 && wsum > 0.0) {
                out.mask.at(y, x) = 1;
                for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = acc[size_t(c)] / wsum;
            } else {
                out.mask.at(y, x) = 0;
                for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = bg[size_t(c)];
            }
        }
    out.tag = AugTag{AugTag::recolored_resized, sample.tag.color, scale};
    out.prompt = build_instance_prompt(spec, out.tag);
    return out;
}

std::string build_instance_prompt(const SubjectSpec& spec, const AugTag& tag) {
    std::string p = "a photo of " + spec.instance_token + " " + spec.class_token + ", ";
    if (tag.kind == AugTag::original)
        p += spec.background_placeholder + " background";
    else
        p += tag.color.name + " background";
    return p;
}

std::string build_class_prompt(const SubjectSpec& spec) { return "a photo of " + spec.class_token; }

std::pair<InstanceSample, ClassSample> sample_training_batch(
    const std::vector<InstanceSample>& instances, const std::vector<ClassSample>& classes,
    Rng& rng, const DataConfig& cfg) {
    if (instances.empty() || classes.empty())
        throw std::invalid_argument("sample_training_batch: empty dataset");
    const InstanceSample& base = instances[size_t(rng.uniform_int(0, int(instances.size()) - 1))];
    const ClassSample& cls = classes[size_t(rng.uniform_int(0, int(classes.size()) - 1))];

    if (rng.uniform() < cfg.aug_prob) {
        const PaletteColor& color =
            cfg.palette[size_t(rng.uniform_int(0, int(cfg.palette.size()) - 1))];
        InstanceSample rec = replace_background(base, color, cfg.spec);
        if (rng.uniform() < cfg.resize_frac) {
            const double scale = rng.uniform(cfg.resize_scale_lo, cfg.resize_scale_hi);
            return {resize_foreground(rec, scale, cfg.spec), cls};
        }
        return {std::move(rec), cls};
    }
    return {base, cls};
}

void write_dataset(const std::filesystem::path& dir, const std::vector<InstanceSample>& instances,
                   const std::vector<ClassSample>& classes, std::uint64_t seed,
                   const DataConfig& cfg) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["seed"] = seed;
    manifest["image_size"] = cfg.image_size;
    manifest["instance_token"] = cfg.spec.instance_token;
    manifest["class_token"] = cfg.spec.class_token;
    manifest["background_placeholder"] = cfg.spec.background_placeholder;
    auto tag_json = [](const AugTag& tag) {
        nlohmann::json j;
        j["kind"] = tag.kind == AugTag::original ? "original"
                    : tag.kind == AugTag::recolored ? "recolored"
                                                    : "recolored_resized";
        if (tag.kind != AugTag::original) j["color"] = tag.color.name;
        if (tag.kind == AugTag::recolored_resized) j["scale"] = tag.scale;
        return j;
    };
    nlohmann::json inst = nlohmann::json::array();
    char name[64];
    for (size_t i = 0; i < instances.size(); ++i) {
        std::snprintf(name, sizeof(name), "instance_%02zu.ppm", i);
        write_ppm(instances[i].image, dir / name);
        std::string img_name = name;
        std::snprintf(name, sizeof(name), "instance_%02zu_mask.pgm", i);
        write_pgm(instances[i].mask, dir / name);
        inst.push_back({{"image", img_name},
                        {"mask", name},
                        {"prompt", instances[i].prompt},
                        {"tag", tag_json(instances[i].tag)}});
    }
    nlohmann::json cls = nlohmann::json::array();
    for (size_t i = 0; i < classes.size(); ++i) {
        std::snprintf(name, sizeof(name), "class_%02zu.ppm", i);
        write_ppm(classes[i].image, dir / name);
        cls.push_back({{"image", name}, {"prompt", classes[i].prompt}});
    }
    manifest["instances"] = std::move(inst);
    manifest["classes"] = std::move(cls);
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

}  // namespace hypnos
