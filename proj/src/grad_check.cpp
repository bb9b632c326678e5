#include "icas/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace icas::num {

const GradCheckEntry& GradCheckReport::entry(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw std::out_of_range("grad_check report: no entry named " + name);
}

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double h, double tol) {
    for (const auto& [name, p] : params) p.zero_grad();

    Tensor loss = f();
    if (!std::isfinite(loss.item()))
        throw NumericError("grad_check: non-finite loss at probe point");
    backward(loss);

    GradCheckReport report;
    for (const auto& [name, p] : params) {
        GradCheckEntry entry;
        entry.name = name;
        if (!p.requires_grad()) {
            entry.has_grad = false;
            report.entries.push_back(entry);
            continue;
        }
        entry.has_grad = true;
        std::vector<double> analytic = p.has_grad()
                                           ? p.grad()
                                           : std::vector<double>(p.size(), 0.0);
        Tensor param = p;  // shares the leaf node
        auto& data = param.mutable_values();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            data[i] = saved + h;
            const double fp = f().item();
            data[i] = saved - h;
            const double fm = f().item();
            data[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double denom =
                std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-3});
            entry.max_rel_err =
                std::max(entry.max_rel_err, std::fabs(analytic[i] - numeric) / denom);
        }
        entry.pass = entry.max_rel_err <= tol;
        report.pass = report.pass && entry.pass;
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(entry);
    }
    return report;
}

}  // namespace icas::num
