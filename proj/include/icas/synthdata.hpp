#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "icas/sim.hpp"
#include "icas/spm.hpp"
#include "icas/tensor.hpp"

namespace icas::synth {

// Plain RGB raster, row-major, values in [0,1].
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;  // height*width*3

    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * width + x) * 3 + c];
    }
    double& at(std::size_t y, std::size_t x, std::size_t c) {
        return pixels[(y * width + x) * 3 + c];
    }
    static Image filled(std::size_t w, std::size_t h, double r, double g, double b);
};

using Mask = std::vector<std::uint8_t>;  // height*width, 0/1

enum class SubjectShape { Disk, Square, Triangle };

struct SubjectInfo {
    SubjectShape shape;
    std::array<double, 3> color;
    double cx, cy, radius;
};

struct SyntheticImage {
    Image image;
    std::vector<Mask> subject_masks;  // one per subject, within bounds
    std::vector<SubjectInfo> subjects;
    std::uint64_t seed = 0;
};

struct StyleSpec {
    std::array<std::array<double, 3>, 3> palette;
    double texture_freq = 3.0;
    double contrast = 1.0;
    std::uint64_t seed = 0;

    static StyleSpec from_seed(std::uint64_t seed);
};

// Places n non-overlapping geometric subjects with distinct colors on a
// textured background. Deterministic in (seed, n, size). Throws if placement
// fails after bounded retries.
SyntheticImage gen_content(std::uint64_t seed, std::size_t n_subjects,
                           std::size_t size = 32);

Image render_style(const StyleSpec& spec, std::size_t size = 32);

// Frozen toy encoders: fixed seed-pinned random linear projections of pooled
// image statistics. Not parameters; nothing downstream can train them.
struct Encoders {
    std::size_t embed_dim = 16;
    std::size_t structure_channels = 3;
    std::vector<double> content_proj;  // embed_dim x kStatDim
    std::vector<double> style_proj;    // embed_dim x kStatDim
    std::vector<double> latent_proj;   // (embed_dim - 3) x kStatDim

    static constexpr std::size_t kStatDim = 15;
    static Encoders make(std::size_t embed_dim, std::size_t structure_channels,
                         std::uint64_t seed);
};

sim::Embedding encode_content(const Image& image, const Encoders& enc);
sim::Embedding encode_content_masked(const Image& image, const Mask& mask,
                                     const Encoders& enc);
sim::Embedding encode_style(const Image& image, const Encoders& enc);

// Downsampled edge-derived feature grid at latent resolution; all channels
// are in [0,1] and vanish on gradient-free images.
spm::StructureCondition encode_structure(const Image& image, const Encoders& enc,
                                         std::size_t latent_h, std::size_t latent_w);

// Latent codec paired with pipeline decode: channels 0..2 hold per-patch mean
// RGB mapped to [-1,1]; remaining channels are a fixed projection of patch
// statistics.
num::Tensor encode_latent(const Image& image, const Encoders& enc,
                          std::size_t latent_h, std::size_t latent_w,
                          std::size_t width);

// ---- image utilities ----
std::vector<double> edge_map(const Image& image);  // gradient magnitude, h*w
Image downsample(const Image& image, std::size_t new_w, std::size_t new_h);
Image upsample_nearest(const Image& image, std::size_t factor);
Mask downsample_mask(const Mask& mask, std::size_t w, std::size_t h,
                     std::size_t new_w, std::size_t new_h);
Image flip_horizontal(const Image& image);
Image color_jitter(const Image& image, double amplitude, std::uint64_t seed);

// ---- metrics ----
double binary_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

// IoU of edge maps binarized at 0.1 of each map's own max.
double metric_structure_alignment(const Image& a, const Image& b);

// L2 distance between per-channel (mean, std) statistic vectors.
double metric_style_distance(const Image& output, const Image& style_ref);

// Per subject: normalized cross-correlation of masked edge maps, clamped to
// [0,1]. Both-flat regions score 1, one-flat regions score 0.
std::vector<double> metric_subject_match(const Image& output,
                                         const SyntheticImage& content);

// ---- serialization ----
std::string ppm_bytes(const Image& image);            // binary P6, 8-bit
Image parse_ppm(const std::string& bytes);
std::string pgm_bytes(const Mask& mask, std::size_t w, std::size_t h);  // binary P5

}  // namespace icas::synth
