#include "icas/spm.hpp"

#include <cmath>
#include <string>

#include "icas/rng.hpp"

namespace icas::spm {

using namespace icas::num;

void StructureCondition::validate() const {
    if (feat.rank() != 2 || feat.rows() != height * width)
        throw ShapeError("structure condition: feat " + shape_str(feat.shape()) +
                         " does not match grid " + std::to_string(height) + "x" +
                         std::to_string(width));
}

void StructureScale::validate() const {
    if (!(gamma >= 0.0))
        throw ShapeError("structure scale: gamma must be >= 0, got " +
                         std::to_string(gamma));
}

SpmParams SpmParams::init(std::size_t structure_channels, std::size_t hidden,
                          std::size_t width, std::uint64_t seed) {
    util::Rng rng(seed);
    const double std = 1.0 / std::sqrt(static_cast<double>(structure_channels));
    SpmParams p;
    p.hidden_w = Tensor({structure_channels, hidden},
                        rng.normal_vec(structure_channels * hidden, std));
    p.hidden_b = Tensor::zeros({hidden});
    p.out_w = Tensor::zeros({hidden, width});
    p.out_b = Tensor::zeros({width});
    return p;
}

Tensor project_residual(const StructureCondition& condition, const SpmParams& p) {
    condition.validate();
    if (condition.channels() != p.hidden_w.rows())
        throw ShapeError("project_residual: condition has " +
                         std::to_string(condition.channels()) +
                         " channels, projection expects " +
                         std::to_string(p.hidden_w.rows()));
    Tensor hidden = sigmoid(add(matmul(condition.feat, p.hidden_w), p.hidden_b));
    return add(matmul(hidden, p.out_w), p.out_b);
}

Tensor inject_structure(const Tensor& features, const Tensor& residual,
                        const StructureScale& scale) {
    scale.validate();
    if (features.shape() != residual.shape())
        throw ShapeError("inject_structure: features " + shape_str(features.shape()) +
                         " vs residual " + shape_str(residual.shape()));
    if (scale.gamma == 0.0) return features;
    return add(features, num::scale(residual, scale.gamma));
}

}  // namespace icas::spm
