#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "icas/config.hpp"
#include "icas/pipeline.hpp"
#include "icas/synthdata.hpp"
#include "icas/training.hpp"

namespace icas::exp {

// One line of metrics.csv.
struct MetricRow {
    std::string experiment;
    std::string variant;
    double gamma = 0.0;
    double alpha = 0.0;
    std::size_t k = 1;
    std::size_t image_id = 0;
    double structure_alignment = 0.0;
    double style_distance = 0.0;
    std::size_t subject_id = 0;
    double subject_match = 0.0;
};

std::string metrics_csv(const std::vector<MetricRow>& rows);

struct RunReport {
    nlohmann::json manifest;
    std::vector<MetricRow> rows;
    std::vector<std::pair<std::string, synth::Image>> images;  // relative path -> image
    std::string checkpoint_blob;   // empty when the run did not train
    std::string loss_curve_csv;    // empty when the run did not train
    // Additional raw files (e.g. per-arm checkpoints), relative path -> bytes.
    std::vector<std::pair<std::string, std::string>> extra_files;
};

// Deterministic synthetic corpus + frozen encoders for one experiment.
struct Corpus {
    std::vector<synth::SyntheticImage> train_images;
    std::vector<synth::SyntheticImage> eval_images;
    std::vector<synth::Image> styles;
    synth::Encoders encoders;
};

Corpus build_corpus(const ExperimentConfig& cfg);

pipe::Conditions make_conditions(const synth::SyntheticImage& content,
                                 const synth::Image& style, const Corpus& corpus,
                                 const ExperimentConfig& cfg, bool single_embed);

train::Dataset build_dataset(const Corpus& corpus, const ExperimentConfig& cfg);

// Dispatches on cfg.kind. Everything in the returned report is recomputable
// from (config, seed); wall-clock entries in the manifest are the only
// exception.
RunReport run_experiment(const ExperimentConfig& cfg);

// Atomic (temp-file rename) writes of report.json, metrics.csv, optional
// checkpoint.bin / loss_curve.csv, and PPM image dumps.
void emit_outputs(const RunReport& report, const std::string& out_dir);

// ICAS_THREADS caps concurrent eval variants (default 1).
std::size_t max_threads();

}  // namespace icas::exp
