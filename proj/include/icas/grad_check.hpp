#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "icas/tensor.hpp"

namespace icas::num {

struct GradCheckEntry {
    std::string name;
    bool has_grad = false;   // false for frozen parameters: "no gradient"
    double max_rel_err = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool pass = true;
    double max_rel_err = 0.0;

    const GradCheckEntry& entry(const std::string& name) const;
};

// Compares tape gradients of a scalar function against central finite
// differences (f(x+h) - f(x-h)) / 2h per parameter element. Parameters must
// be the same leaf tensors the closure captures; their values are perturbed
// in place and restored. Frozen parameters (requires_grad == false) are
// reported as having no gradient, never as failures.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double h = 1e-5, double tol = 1e-4);

}  // namespace icas::num
