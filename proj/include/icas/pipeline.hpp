#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icas/cycling.hpp"
#include "icas/sim.hpp"
#include "icas/spm.hpp"
#include "icas/synthdata.hpp"
#include "icas/tensor.hpp"

namespace icas::pipe {

using num::Tensor;

struct BackboneConfig {
    std::size_t latent_h = 8;
    std::size_t latent_w = 8;
    std::size_t width = 16;          // d
    std::size_t blocks = 6;          // L, also the content cross-attention sites
    std::size_t style_tokens = 4;    // m
    std::size_t structure_channels = 3;
    std::vector<bool> spm_sites;     // empty = inject at every block
    sim::GateConfig gate;
    spm::StructureScale structure;

    std::size_t tokens() const { return latent_h * latent_w; }
    std::size_t spm_hidden() const { return 2 * width; }
    bool spm_site_enabled(std::size_t block) const;
    void validate() const;
};

// One backbone block: self-attention, a gated content cross-attention site,
// and an output MLP. The content weights are the trainable injection
// sub-block; everything else stands in for the pre-trained backbone.
struct BlockParams {
    Tensor attn_q, attn_k, attn_v, attn_o;      // {d,d}
    Tensor content_key, content_value;          // {d,d}
    Tensor content_gate_w;                      // {d,d}
    Tensor content_gate_b;                      // {d}
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;      // {d,2d},{2d},{2d,d},{d}
};

struct Model {
    BackboneConfig config;
    sim::SimParams sim_params;
    spm::SpmParams spm_params;
    std::vector<BlockParams> blocks;

    static Model init(const BackboneConfig& config, std::uint64_t seed);

    // Fixed iteration order over (name, tensor handle); checkpoint and
    // partition machinery key off these names.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

struct Conditions {
    cycle::ContentEmbeddingList content;
    sim::Embedding style;
    std::optional<spm::StructureCondition> structure;
    // Absent schedule means the cycling module is bypassed and every site
    // sees items[0].
    std::optional<cycle::CyclicSchedule> schedule;
};

struct ForwardResult {
    Tensor eps_hat;              // {N, d}
    std::vector<Tensor> gates;   // learned style gates, one per block
};

ForwardResult forward(const Tensor& x_t, std::size_t t, const Conditions& cond,
                      const Model& model);

Tensor time_embedding(std::size_t t, std::size_t width);

// Cumulative signal ratios alpha_bar[0..T], alpha_bar[0] = 1, strictly
// decreasing.
struct NoiseSchedule {
    std::vector<double> alpha_bar;

    std::size_t steps() const { return alpha_bar.size() - 1; }
    static NoiseSchedule linear(std::size_t steps, double final_alpha_bar = 0.1);
    void validate() const;
};

using Denoiser = std::function<Tensor(const Tensor& x_t, std::size_t t)>;

// Deterministic DDIM-style update (eta = 0) from x_T down to x_0.
Tensor sample(const Tensor& x_noise, const Denoiser& denoiser,
              const NoiseSchedule& schedule);
Tensor sample(const Tensor& x_noise, const Conditions& cond, const Model& model,
              const NoiseSchedule& schedule);

// Fixed linear map of latent channels 0..2 to RGB in [0,1], clamped; the
// inverse of the latent codec's mean-RGB channels.
synth::Image decode(const Tensor& x0, std::size_t latent_h, std::size_t latent_w);

}  // namespace icas::pipe
