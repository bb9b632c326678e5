#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "icas/experiments.hpp"
#include "icas/tensor.hpp"
#include "icas/training.hpp"

namespace {
constexpr int kExitConfig = 2;
constexpr int kExitPartition = 3;
constexpr int kExitNumeric = 4;

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<double> gamma;
};

int run(const std::string& kind, const CliOptions& opts) {
    auto cfg = icas::exp::ExperimentConfig::parse_file(opts.config_path);
    cfg.kind = kind;
    cfg.out_dir = opts.out_dir;
    if (opts.seed) {
        cfg.seed = *opts.seed;
        cfg.train.seed = *opts.seed;
    }
    if (opts.alpha) cfg.backbone.gate.alpha = *opts.alpha;
    if (opts.gamma) cfg.backbone.structure.gamma = *opts.gamma;
    cfg.validate();

    auto report = icas::exp::run_experiment(cfg);
    icas::exp::emit_outputs(report, cfg.out_dir);
    std::printf("%s: wrote report.json and metrics.csv to %s\n", kind.c_str(),
                cfg.out_dir.c_str());
    return 0;
}
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ICAS-style gated attention pipeline and ablation harness"};
    app.require_subcommand(1);

    CliOptions opts;
    const char* verbs[] = {"train", "sample", "ablate-gate", "ablate-embed",
                           "compare-strategies", "sweep-gamma"};
    std::string chosen;
    for (const char* verb : verbs) {
        auto* sub = app.add_subcommand(verb);
        sub->add_option("--config", opts.config_path, "experiment config file")
            ->required();
        sub->add_option("--out", opts.out_dir, "output directory")->required();
        sub->add_option("--seed", opts.seed, "override experiment seed");
        sub->add_option("--alpha", opts.alpha, "override style strength alpha");
        sub->add_option("--gamma", opts.gamma, "override structure scale gamma");
        sub->callback([&chosen, verb] { chosen = verb; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        return run(chosen, opts);
    } catch (const icas::exp::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const icas::train::PartitionError& e) {
        std::fprintf(stderr, "partition breach: %s\n", e.what());
        return kExitPartition;
    } catch (const icas::num::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
