#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "icas/cycling.hpp"
#include "icas/pipeline.hpp"
#include "icas/training.hpp"

namespace icas::exp {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorpusSpec {
    std::size_t train_images = 8;
    std::size_t eval_images = 4;
    std::size_t subjects = 2;
    std::size_t image_size = 32;
    std::size_t styles = 3;
    std::uint64_t seed = 7;
    cycle::ExtractMode embed_mode = cycle::ExtractMode::Segmentation;
};

// One config file fully determines a run. Flat key-value text with
// [sections]; unknown sections or keys are rejected.
struct ExperimentConfig {
    std::string kind;  // train|sample|ablate-gate|ablate-embed|compare-strategies|sweep-gamma
    std::uint64_t seed = 42;
    std::string out_dir;

    pipe::BackboneConfig backbone;  // gamma/alpha live in structure/gate
    train::TrainConfig train;
    train::Preset preset = train::Preset::ContentOnly;
    std::string checkpoint;  // optional: load instead of training
    CorpusSpec corpus;

    void validate() const;

    static ExperimentConfig parse_string(const std::string& text);
    static ExperimentConfig parse_file(const std::string& path);
};

}  // namespace icas::exp
