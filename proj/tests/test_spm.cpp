#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "icas/grad_check.hpp"
#include "icas/rng.hpp"
#include "icas/spm.hpp"

using namespace icas::spm;
using namespace icas::num;
using icas::util::Rng;

namespace {
StructureCondition random_condition(std::size_t h, std::size_t w, std::size_t d_s,
                                    Rng& rng) {
    std::vector<double> v(h * w * d_s);
    for (auto& e : v) e = rng.uniform(0.0, 1.0);
    StructureCondition c;
    c.feat = Tensor({h * w, d_s}, std::move(v));
    c.height = h;
    c.width = w;
    return c;
}

SpmParams random_params(std::size_t d_s, std::size_t d_h, std::size_t d,
                        std::uint64_t seed, bool grad = false) {
    Rng rng(seed);
    SpmParams p;
    p.hidden_w = Tensor({d_s, d_h}, rng.normal_vec(d_s * d_h), grad);
    p.hidden_b = Tensor({d_h}, rng.normal_vec(d_h), grad);
    p.out_w = Tensor({d_h, d}, rng.normal_vec(d_h * d), grad);
    p.out_b = Tensor({d}, rng.normal_vec(d), grad);
    return p;
}
}  // namespace

TEST_CASE("zero-initialized projection is exactly inert") {
    Rng rng(1);
    SpmParams p = SpmParams::init(3, 10, 8, 42);
    for (double v : p.out_w.values()) CHECK(v == 0.0);
    for (double v : p.out_b.values()) CHECK(v == 0.0);
    StructureCondition cond = random_condition(4, 4, 3, rng);
    Tensor r = project_residual(cond, p);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == 0.0);
}

TEST_CASE("constant input gives a cell-constant residual") {
    // F_S = 0, hidden bias 0: hidden is sigma(0) = 0.5 everywhere, so each
    // cell's residual is 0.5 * column-sums of out_w + out_b.
    const std::size_t d_s = 3, d_h = 4, d = 5;
    SpmParams p = random_params(d_s, d_h, d, 7);
    p.hidden_b = Tensor::zeros({d_h});
    StructureCondition cond;
    cond.feat = Tensor::zeros({6, d_s});
    cond.height = 2;
    cond.width = 3;
    Tensor r = project_residual(cond, p);
    for (std::size_t j = 0; j < d; ++j) {
        double want = p.out_b[j];
        for (std::size_t hidx = 0; hidx < d_h; ++hidx)
            want += 0.5 * p.out_w.at(hidx, j);
        for (std::size_t cell = 0; cell < 6; ++cell)
            CHECK(r.at(cell, j) == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("random projection matches per-cell loop oracle within 1e-12") {
    const std::size_t h = 4, w = 4, d_s = 3, d_h = 5, d = 8;
    Rng rng(13);
    StructureCondition cond = random_condition(h, w, d_s, rng);
    SpmParams p = random_params(d_s, d_h, d, 29);
    Tensor got = project_residual(cond, p);
    for (std::size_t cell = 0; cell < h * w; ++cell) {
        std::vector<double> hidden(d_h);
        for (std::size_t k = 0; k < d_h; ++k) {
            double pre = p.hidden_b[k];
            for (std::size_t c = 0; c < d_s; ++c)
                pre += cond.feat.at(cell, c) * p.hidden_w.at(c, k);
            hidden[k] = 1.0 / (1.0 + std::exp(-pre));
        }
        for (std::size_t j = 0; j < d; ++j) {
            double want = p.out_b[j];
            for (std::size_t k = 0; k < d_h; ++k)
                want += hidden[k] * p.out_w.at(k, j);
            CHECK(std::fabs(got.at(cell, j) - want) < 1e-12);
        }
    }
}

TEST_CASE("inject_structure: disabled at gamma zero, default scale, linearity") {
    Rng rng(5);
    Tensor f({6, 4}, rng.normal_vec(24));
    Tensor r({6, 4}, rng.normal_vec(24));

    Tensor same = inject_structure(f, r, StructureScale{0.0});
    CHECK(same.node() == f.node());  // bit-identical by construction

    StructureScale def;
    CHECK(def.gamma == 0.7);
    Tensor scaled = inject_structure(f, r, def);
    for (std::size_t i = 0; i < 24; ++i)
        CHECK(scaled[i] == doctest::Approx(f[i] + 0.7 * r[i]).epsilon(1e-14));

    for (double gamma : {0.25, 0.5, 1.3}) {
        Tensor one = inject_structure(f, r, StructureScale{gamma});
        Tensor two = inject_structure(f, r, StructureScale{2 * gamma});
        for (std::size_t i = 0; i < 24; ++i)
            CHECK(std::fabs((two[i] - one[i]) - gamma * r[i]) < 1e-12);
    }
}

TEST_CASE("shape and scale validation") {
    Tensor f({4, 4}, std::vector<double>(16, 0.0));
    Tensor r({4, 3}, std::vector<double>(12, 0.0));
    CHECK_THROWS_AS(inject_structure(f, r, StructureScale{0.5}), ShapeError);
    CHECK_THROWS_AS(inject_structure(f, f, StructureScale{-0.1}), ShapeError);

    SpmParams p = SpmParams::init(3, 4, 8, 1);
    Rng rng(2);
    StructureCondition wide = random_condition(2, 2, 5, rng);
    CHECK_THROWS_AS(project_residual(wide, p), ShapeError);
    StructureCondition bad = random_condition(2, 2, 3, rng);
    bad.height = 3;  // grid no longer matches the flattened rows
    CHECK_THROWS_AS(project_residual(bad, p), ShapeError);
}

TEST_CASE("all four projection parameters pass finite differences") {
    const std::size_t d_s = 3, d_h = 5, d = 6;
    Rng rng(23);
    StructureCondition cond = random_condition(3, 3, d_s, rng);
    SpmParams p = random_params(d_s, d_h, d, 31, /*grad=*/true);
    Tensor target({9, d}, rng.normal_vec(9 * d));

    auto f = [&] {
        Tensor base = Tensor::zeros({9, d});
        Tensor out = inject_structure(base, project_residual(cond, p),
                                      StructureScale{0.7});
        Tensor diff = sub(out, target);
        return mean(mul(diff, diff));
    };
    auto report = grad_check(f,
                             {{"hidden_w", p.hidden_w},
                              {"hidden_b", p.hidden_b},
                              {"out_w", p.out_w},
                              {"out_b", p.out_b}},
                             1e-5, 1e-4);
    CHECK(report.pass);
    for (const auto& e : report.entries) CHECK(e.has_grad);
}
