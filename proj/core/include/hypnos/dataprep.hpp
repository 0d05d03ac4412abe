#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hypnos/image.hpp"
#include "hypnos/rng.hpp"

namespace hypnos {

struct SubjectSpec {
    std::string instance_token = "sks";
    std::string class_token = "figurine";
    std::string background_placeholder = "krn";
};

struct PaletteColor {
    std::string name;
    Rgb rgb;
};

std::vector<PaletteColor> default_palette();

struct AugTag {
    enum Kind { original, recolored, recolored_resized };
    Kind kind = original;
    PaletteColor color;  // valid for recolored*
    double scale = 1.0;  // valid for recolored_resized
};

struct InstanceSample {
    ImageTensor image;
    Mask mask;
    std::string prompt;
    AugTag tag;
};

struct ClassSample {
    ImageTensor image;
    std::string prompt;
};

struct DataConfig {
    int image_size = 64;
    int n_instance = 4;
    int n_class = 16;
    SubjectSpec spec;
    std::vector<PaletteColor> palette = default_palette();
    double aug_prob = 0.66;          // fraction of batch draws that are recolored
    double resize_frac = 0.15;       // fraction of recolored draws that are also resized
    double resize_scale_lo = 0.6;
    double resize_scale_hi = 0.9;
};

// Procedural sprite: a striped rounded-rectangle body with a circular cap.
// The mask is the exact inside test used during rendering, so it is an
// oracle by construction.
struct SpriteParams {
    double cx, cy;        // center in [0,1] image coordinates
    double half_w, half_h;
    double cap_radius;
    double corner_radius;
    int stripes;
    Rgb body_color, accent_color, cap_color;
};

SpriteParams instance_sprite_params(std::uint64_t seed);
SpriteParams random_sprite_params(Rng& rng);
void render_sprite(const SpriteParams& sp, ImageTensor& img, Mask& mask);
ImageTensor render_background(Rng& rng, int size);

std::pair<std::vector<InstanceSample>, std::vector<ClassSample>>
generate_synthetic_dataset(std::uint64_t seed, const DataConfig& cfg);

// Background pixels (mask == 0) become the monotone color; foreground pixels
// are bit-unchanged. Prompt and tag are rewritten to match.
InstanceSample replace_background(const InstanceSample& sample, const PaletteColor& color,
                                  const SubjectSpec& spec);

// Rescales the sprite (and mask) about its centroid onto the sample's
// monotone background. Only valid for recolored samples. 0.5 <= scale <= 1.
InstanceSample resize_foreground(const InstanceSample& sample, double scale,
                                 const SubjectSpec& spec);

std::string build_instance_prompt(const SubjectSpec& spec, const AugTag& tag);
std::string build_class_prompt(const SubjectSpec& spec);

// One training pair per step; recoloring with probability aug_prob, a
// resize_frac sub-fraction of those also resized.
std::pair<InstanceSample, ClassSample> sample_training_batch(
    const std::vector<InstanceSample>& instances, const std::vector<ClassSample>& classes,
    Rng& rng, const DataConfig& cfg);

// Dataset directory: instance_XX.ppm / instance_XX_mask.pgm / class_XX.ppm
// plus manifest.json with prompts, tags, and the generating seed.
void write_dataset(const std::filesystem::path& dir, const std::vector<InstanceSample>& instances,
                   const std::vector<ClassSample>& classes, std::uint64_t seed,
                   const DataConfig& cfg);

}  // namespace hypnos
