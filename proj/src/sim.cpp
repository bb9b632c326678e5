#include "icas/sim.hpp"

#include <cmath>
#include <string>

#include "icas/rng.hpp"

namespace icas::sim {

using namespace icas::num;

Tensor Embedding::as_row() const { return reshape(vec, {1, vec.shape()[0]}); }

void GateConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ShapeError("gate config: alpha must lie in [0,1], got " +
                         std::to_string(alpha));
}

GateConfig GateConfig::learned(double alpha) {
    GateConfig c;
    c.alpha = alpha;
    c.mode = GateMode::Learned;
    c.validate();
    return c;
}

GateConfig GateConfig::fixed(double value, double alpha) {
    GateConfig c;
    c.alpha = alpha;
    c.mode = GateMode::FixedConstant;
    c.fixed_value = value;
    c.validate();
    return c;
}

SimParams SimParams::init(std::size_t width, std::size_t style_tokens,
                          std::uint64_t seed) {
    if (style_tokens < 1) throw ShapeError("sim params: style_tokens must be >= 1");
    util::Rng rng(seed);
    const double std = 1.0 / std::sqrt(static_cast<double>(width));
    SimParams p;
    p.style_tokens = style_tokens;
    p.key_proj = Tensor({width, style_tokens * width},
                        rng.normal_vec(width * style_tokens * width, std));
    p.value_proj = Tensor({width, style_tokens * width},
                          rng.normal_vec(width * style_tokens * width, std));
    p.gate_w = Tensor::zeros({width, width});
    p.gate_b = Tensor::zeros({width});
    return p;
}

namespace {
void require_width(const char* op, std::size_t got, std::size_t want) {
    if (got != want)
        throw ShapeError(std::string(op) + ": embedding width " + std::to_string(got) +
                         " does not match parameter width " + std::to_string(want));
}
}  // namespace

std::pair<Tensor, Tensor> project_style(const Embedding& style, const SimParams& p) {
    const std::size_t d = p.width();
    require_width("project_style", style.width(), d);
    Tensor row = style.as_row();  // {1, d}
    Tensor keys = reshape(matmul(row, p.key_proj), {p.style_tokens, d});
    Tensor values = reshape(matmul(row, p.value_proj), {p.style_tokens, d});
    return {keys, values};
}

Tensor style_attention(const Tensor& queries, const Tensor& keys, const Tensor& values) {
    if (queries.rank() != 2 || keys.rank() != 2 || values.rank() != 2 ||
        queries.cols() != keys.cols() || keys.shape() != values.shape()) {
        throw ShapeError("style_attention: incompatible shapes Q" +
                         shape_str(queries.shape()) + " K" + shape_str(keys.shape()) +
                         " V" + shape_str(values.shape()));
    }
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
    Tensor scores = scale(matmul_nt(queries, keys), inv_sqrt_d);  // {N, m}
    return matmul(softmax_rows(scores), values);                  // {N, d}
}

Tensor compute_gate(const Embedding& content, const Embedding& style,
                    const SimParams& p, const GateConfig& cfg) {
    cfg.validate();
    if (cfg.mode == GateMode::FixedConstant)
        return Tensor::full({p.width()}, cfg.fixed_value);
    const std::size_t d = p.width();
    require_width("compute_gate", content.width(), d);
    require_width("compute_gate", style.width(), d);
    Tensor agreement = mul(content.as_row(), style.as_row());          // {1, d}
    Tensor pre = add(matmul(agreement, transpose(p.gate_w)), p.gate_b);  // {1, d}
    return reshape(sigmoid(pre), {d});
}

StyleInjection inject_style_detailed(const Tensor& queries, const Embedding& content,
                                     const Embedding& style, const SimParams& p,
                                     const GateConfig& cfg) {
    cfg.validate();
    require_width("inject_style", queries.cols(), p.width());

    StyleInjection out;
    Tensor blended;
    if (cfg.alpha == 0.0) {
        blended = queries;
    } else {
        auto [keys, values] = project_style(style, p);
        Tensor attended = style_attention(queries, keys, values);
        blended = cfg.alpha == 1.0
                      ? attended
                      : add(scale(attended, cfg.alpha), scale(queries, 1.0 - cfg.alpha));
    }
    if (cfg.mode == GateMode::FixedConstant && cfg.fixed_value == 0.0) {
        out.features = blended;
        return out;
    }
    Tensor gate = compute_gate(content, style, p, cfg);
    out.features = add(blended, gate);
    if (cfg.mode == GateMode::Learned) out.gate = gate;
    return out;
}

Tensor inject_style(const Tensor& queries, const Embedding& content,
                    const Embedding& style, const SimParams& p, const GateConfig& cfg) {
    return inject_style_detailed(queries, content, style, p, cfg).features;
}

}  // namespace icas::sim
