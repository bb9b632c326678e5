#include "icas/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "icas/rng.hpp"

namespace icas::pipe {

using namespace icas::num;

bool BackboneConfig::spm_site_enabled(std::size_t block) const {
    if (spm_sites.empty()) return true;
    return spm_sites[block];
}

void BackboneConfig::validate() const {
    if (latent_h == 0 || latent_w == 0 || width == 0 || blocks == 0 ||
        style_tokens == 0)
        throw ShapeError("backbone config: all extents must be positive");
    if (!spm_sites.empty() && spm_sites.size() != blocks)
        throw ShapeError("backbone config: spm_sites mask must have one entry per block");
    gate.validate();
    structure.validate();
}

Model Model::init(const BackboneConfig& config, std::uint64_t seed) {
    config.validate();
    Model m;
    m.config = config;
    const std::size_t d = config.width;
    m.sim_params = sim::SimParams::init(d, config.style_tokens, seed ^ 0x51u);
    m.spm_params =
        spm::SpmParams::init(config.structure_channels, config.spm_hidden(), d,
                             seed ^ 0x52u);
    util::Rng rng(seed);
    const double std = 1.0 / std::sqrt(double(d));
    auto mat = [&](std::size_t r, std::size_t c) {
        return Tensor({r, c}, rng.normal_vec(r * c, std));
    };
    for (std::size_t b = 0; b < config.blocks; ++b) {
        BlockParams blk;
        blk.attn_q = mat(d, d);
        blk.attn_k = mat(d, d);
        blk.attn_v = mat(d, d);
        blk.attn_o = mat(d, d);
        blk.content_key = mat(d, d);
        blk.content_value = mat(d, d);
        blk.content_gate_w = Tensor::zeros({d, d});
        blk.content_gate_b = Tensor::zeros({d});
        blk.mlp_w1 = mat(d, 2 * d);
        blk.mlp_b1 = Tensor::zeros({2 * d});
        blk.mlp_w2 = mat(2 * d, d);
        blk.mlp_b2 = Tensor::zeros({d});
        m.blocks.push_back(std::move(blk));
    }
    return m;
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("sim.key_proj", sim_params.key_proj);
    out.emplace_back("sim.value_proj", sim_params.value_proj);
    out.emplace_back("sim.gate_w", sim_params.gate_w);
    out.emplace_back("sim.gate_b", sim_params.gate_b);
    out.emplace_back("spm.hidden_w", spm_params.hidden_w);
    out.emplace_back("spm.hidden_b", spm_params.hidden_b);
    out.emplace_back("spm.out_w", spm_params.out_w);
    out.emplace_back("spm.out_b", spm_params.out_b);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string prefix = "block" + std::to_string(b) + ".";
        const auto& blk = blocks[b];
        out.emplace_back(prefix + "attn_q", blk.attn_q);
        out.emplace_back(prefix + "attn_k", blk.attn_k);
        out.emplace_back(prefix + "attn_v", blk.attn_v);
        out.emplace_back(prefix + "attn_o", blk.attn_o);
        out.emplace_back(prefix + "content_key", blk.content_key);
        out.emplace_back(prefix + "content_value", blk.content_value);
        out.emplace_back(prefix + "content_gate_w", blk.content_gate_w);
        out.emplace_back(prefix + "content_gate_b", blk.content_gate_b);
        out.emplace_back(prefix + "mlp_w1", blk.mlp_w1);
        out.emplace_back(prefix + "mlp_b1", blk.mlp_b1);
        out.emplace_back(prefix + "mlp_w2", blk.mlp_w2);
        out.emplace_back(prefix + "mlp_b2", blk.mlp_b2);
    }
    return out;
}

Tensor time_embedding(std::size_t t, std::size_t width) {
    std::vector<double> v(width);
    for (std::size_t i = 0; i < width; i += 2) {
        const double freq =
            std::pow(10000.0, -double(i) / double(std::max<std::size_t>(width, 2)));
        v[i] = std::sin(double(t) * freq);
        if (i + 1 < width) v[i + 1] = std::cos(double(t) * freq);
    }
    return Tensor({width}, std::move(v));
}

namespace {
Tensor self_attention(const Tensor& x, const BlockParams& blk) {
    const double inv_sqrt_d = 1.0 / std::sqrt(double(x.cols()));
    Tensor q = matmul(x, blk.attn_q);
    Tensor k = matmul(x, blk.attn_k);
    Tensor v = matmul(x, blk.attn_v);
    Tensor attended = matmul(softmax_rows(scale(matmul_nt(q, k), inv_sqrt_d)), v);
    return add(x, matmul(attended, blk.attn_o));
}

Tensor content_cross_attention(const Tensor& x, const sim::Embedding& content,
                               const BlockParams& blk) {
    Tensor row = content.as_row();                       // {1, d}
    Tensor key = matmul(row, blk.content_key);           // {1, d}
    Tensor value = matmul(row, blk.content_value);       // {1, d}
    Tensor attended = sim::style_attention(x, key, value);
    Tensor gate =
        sigmoid(add(matmul(row, blk.content_gate_w), blk.content_gate_b));  // {1, d}
    return add(x, mul(attended, reshape(gate, {gate.cols()})));
}

Tensor block_mlp(const Tensor& x, const BlockParams& blk) {
    Tensor hidden = sigmoid(add(matmul(x, blk.mlp_w1), blk.mlp_b1));
    return add(x, add(matmul(hidden, blk.mlp_w2), blk.mlp_b2));
}
}  // namespace

ForwardResult forward(const Tensor& x_t, std::size_t t, const Conditions& cond,
                      const Model& model) {
    const auto& cfg = model.config;
    cfg.validate();
    cond.content.validate();
    if (x_t.rank() != 2 || x_t.rows() != cfg.tokens() || x_t.cols() != cfg.width)
        throw ShapeError("forward: latent " + shape_str(x_t.shape()) +
                         " does not match config " + std::to_string(cfg.tokens()) +
                         "x" + std::to_string(cfg.width));
    if (cond.schedule && cond.schedule->num_sites != cfg.blocks)
        throw ShapeError("forward: schedule covers " +
                         std::to_string(cond.schedule->num_sites) + " sites, backbone has " +
                         std::to_string(cfg.blocks));

    Tensor residual;
    const bool use_spm = cond.structure.has_value() && cfg.structure.gamma != 0.0;
    if (use_spm) residual = spm::project_residual(*cond.structure, model.spm_params);

    ForwardResult result;
    Tensor x = add(x_t, time_embedding(t, cfg.width));
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        const auto& blk = model.blocks[b];
        const sim::Embedding& site_content =
            cond.schedule ? cycle::embedding_for_site(*cond.schedule, cond.content, b)
                          : cond.content.items.front();
        x = self_attention(x, blk);
        x = content_cross_attention(x, site_content, blk);
        auto injected = sim::inject_style_detailed(x, site_content, cond.style,
                                                  model.sim_params, cfg.gate);
        x = injected.features;
        if (injected.gate) result.gates.push_back(*injected.gate);
        if (use_spm && cfg.spm_site_enabled(b))
            x = spm::inject_structure(x, residual, cfg.structure);
        x = block_mlp(x, blk);
    }
    result.eps_hat = x;
    return result;
}

NoiseSchedule NoiseSchedule::linear(std::size_t steps, double final_alpha_bar) {
    if (steps == 0) throw ShapeError("noise schedule: steps must be >= 1");
    NoiseSchedule s;
    s.alpha_bar.resize(steps + 1);
    for (std::size_t t = 0; t <= steps; ++t)
        s.alpha_bar[t] = 1.0 - (1.0 - final_alpha_bar) * double(t) / double(steps);
    s.validate();
    return s;
}

void NoiseSchedule::validate() const {
    if (alpha_bar.size() < 2 || alpha_bar[0] != 1.0)
        throw ShapeError("noise schedule: alpha_bar[0] must be 1");
    for (std::size_t t = 1; t < alpha_bar.size(); ++t)
        if (!(alpha_bar[t] > 0.0 && alpha_bar[t] < alpha_bar[t - 1]))
            throw ShapeError("noise schedule: alpha_bar must be strictly decreasing "
                             "and positive");
}

Tensor sample(const Tensor& x_noise, const Denoiser& denoiser,
              const NoiseSchedule& schedule) {
    schedule.validate();
    Tensor x = x_noise;
    for (std::size_t t = schedule.steps(); t >= 1; --t) {
        Tensor eps = denoiser(x, t);
        const double ab_t = schedule.alpha_bar[t];
        const double ab_prev = schedule.alpha_bar[t - 1];
        // x0_hat = (x_t - sqrt(1 - ab_t) eps) / sqrt(ab_t)
        Tensor x0_hat = scale(sub(x, scale(eps, std::sqrt(1.0 - ab_t))),
                              1.0 / std::sqrt(ab_t));
        x = add(scale(x0_hat, std::sqrt(ab_prev)),
                scale(eps, std::sqrt(1.0 - ab_prev)));
        for (double v : x.values())
            if (!std::isfinite(v))
                throw NumericError("sample: non-finite latent at step " +
                                   std::to_string(t));
    }
    return x;
}

Tensor sample(const Tensor& x_noise, const Conditions& cond, const Model& model,
              const NoiseSchedule& schedule) {
    return sample(
        x_noise,
        [&](const Tensor& x, std::size_t t) { return forward(x, t, cond, model).eps_hat; },
        schedule);
}

synth::Image decode(const Tensor& x0, std::size_t latent_h, std::size_t latent_w) {
    if (x0.rank() != 2 || x0.rows() != latent_h * latent_w || x0.cols() < 3)
        throw ShapeError("decode: latent " + shape_str(x0.shape()) +
                         " does not match grid " + std::to_string(latent_h) + "x" +
                         std::to_string(latent_w));
    synth::Image img;
    img.width = latent_w;
    img.height = latent_h;
    img.pixels.resize(latent_w * latent_h * 3);
    for (std::size_t i = 0; i < latent_h * latent_w; ++i)
        for (std::size_t c = 0; c < 3; ++c)
            img.pixels[i * 3 + c] = std::clamp(0.5 + 0.5 * x0.at(i, c), 0.0, 1.0);
    return img;
}

}  // namespace icas::pipe
