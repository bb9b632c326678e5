#pragma once

#include <cstdint>

#include "icas/tensor.hpp"

namespace icas::spm {

using num::Tensor;

// Structural feature map at latent resolution, cells flattened row-major.
struct StructureCondition {
    Tensor feat;  // {H*W, d_s}, entries in [0,1]
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t channels() const { return feat.cols(); }
    void validate() const;
};

// Two-layer per-cell projection network with sigmoid hidden activation.
// The output layer is zero at initialization so the injection is exactly
// inert at step 0.
struct SpmParams {
    Tensor hidden_w;  // {d_s, d_h}
    Tensor hidden_b;  // {d_h}
    Tensor out_w;     // {d_h, d}
    Tensor out_b;     // {d}

    static SpmParams init(std::size_t structure_channels, std::size_t hidden,
                          std::size_t width, std::uint64_t seed);
};

struct StructureScale {
    double gamma = 0.7;

    void validate() const;
};

// Per-cell MLP: R_S[i] = out_w^T sigmoid(hidden_w^T F_S[i] + hidden_b) + out_b.
Tensor project_residual(const StructureCondition& condition, const SpmParams& p);

// features + gamma * residual. gamma == 0 returns the features tensor itself.
Tensor inject_structure(const Tensor& features, const Tensor& residual,
                        const StructureScale& scale);

}  // namespace icas::spm
