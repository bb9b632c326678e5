#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "icas/tensor.hpp"

namespace icas::sim {

using num::Tensor;

// A d-dimensional content/style vector shared pipeline-wide.
struct Embedding {
    Tensor vec;  // shape {d}

    std::size_t width() const { return vec.shape()[0]; }
    Tensor as_row() const;  // shape {1, d}
};

enum class GateMode { Learned, FixedConstant };

struct GateConfig {
    double alpha = 0.5;  // style strength, interpolates attention vs query
    GateMode mode = GateMode::Learned;
    double fixed_value = 1.0;  // fixed_value 1.0 is the No-Gate ablation arm

    void validate() const;
    static GateConfig learned(double alpha = 0.5);
    static GateConfig fixed(double value, double alpha = 0.5);
};

// Style injection weights. The key/value projections stand in for pre-trained
// style blocks and emit m style tokens; the gate parameters are the learnable
// part. Freezing is enforced by the training partition, not here.
struct SimParams {
    Tensor key_proj;    // {d, m*d}
    Tensor value_proj;  // {d, m*d}
    Tensor gate_w;      // {d, d}
    Tensor gate_b;      // {d}
    std::size_t style_tokens = 1;  // m

    std::size_t width() const { return gate_b.shape()[0]; }

    // key/value from a seeded normal (std 1/sqrt(d)); gate weights zero so
    // training starts from the neutral gate 0.5.
    static SimParams init(std::size_t width, std::size_t style_tokens,
                          std::uint64_t seed);
};

// K_R and V_R, each {m, d}, projected from the style embedding.
std::pair<Tensor, Tensor> project_style(const Embedding& style, const SimParams& p);

// softmax(Q K^T / sqrt(d)) V over the m style tokens. queries is {N, d}.
Tensor style_attention(const Tensor& queries, const Tensor& keys, const Tensor& values);

// Gate vector {d}: sigmoid(W_g (e_C * e_R) + b_g) in Learned mode, or a
// constant vector with no parameters on the tape in FixedConstant mode.
Tensor compute_gate(const Embedding& content, const Embedding& style,
                    const SimParams& p, const GateConfig& cfg);

struct StyleInjection {
    Tensor features;             // {N, d}
    std::optional<Tensor> gate;  // present only for learned gates (regularizer input)
};

// alpha * A_R + (1 - alpha) * Q + g, gate row-broadcast over query rows.
// alpha endpoints and a FixedConstant(0) gate short-circuit so the identity
// contracts hold bit-exactly.
StyleInjection inject_style_detailed(const Tensor& queries, const Embedding& content,
                                     const Embedding& style, const SimParams& p,
                                     const GateConfig& cfg);

Tensor inject_style(const Tensor& queries, const Embedding& content,
                    const Embedding& style, const SimParams& p, const GateConfig& cfg);

}  // namespace icas::sim
