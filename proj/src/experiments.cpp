#include "icas/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "icas/checkpoint.hpp"
#include "icas/rng.hpp"
#include "icas/sha256.hpp"

namespace icas::exp {

namespace fs = std::filesystem;
using nlohmann::json;
using num::Tensor;

namespace {
std::string fmt(double v, const char* spec = "%.9g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

json config_echo(const ExperimentConfig& cfg) {
    json j;
    j["kind"] = cfg.kind;
    j["seed"] = cfg.seed;
    j["backbone"] = {{"latent_h", cfg.backbone.latent_h},
                     {"latent_w", cfg.backbone.latent_w},
                     {"width", cfg.backbone.width},
                     {"blocks", cfg.backbone.blocks},
                     {"style_tokens", cfg.backbone.style_tokens},
                     {"alpha", cfg.backbone.gate.alpha},
                     {"gamma", cfg.backbone.structure.gamma},
                     {"gate_mode", cfg.backbone.gate.mode == sim::GateMode::Learned
                                       ? "learned"
                                       : "fixed"},
                     {"gate_fixed_value", cfg.backbone.gate.fixed_value}};
    j["train"] = {{"steps", cfg.train.steps},
                  {"lr", cfg.train.learning_rate},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"eps", cfg.train.eps},
                  {"weight_decay", cfg.train.weight_decay},
                  {"lambda_gate", cfg.train.lambda_gate},
                  {"batch_size", cfg.train.batch_size},
                  {"timesteps", cfg.train.timesteps},
                  {"preset", train::preset_name(cfg.preset)}};
    j["corpus"] = {{"images", cfg.corpus.train_images},
                   {"eval_images", cfg.corpus.eval_images},
                   {"subjects", cfg.corpus.subjects},
                   {"image_size", cfg.corpus.image_size},
                   {"styles", cfg.corpus.styles},
                   {"seed", cfg.corpus.seed},
                   {"embed_mode",
                    cfg.corpus.embed_mode == cycle::ExtractMode::Segmentation
                        ? "segmentation"
                        : "augmentation"}};
    return j;
}

Tensor eval_noise(const ExperimentConfig& cfg, std::size_t image_index,
                  std::size_t tokens, std::size_t width) {
    util::Rng rng(cfg.seed ^ (0x9e3779b97f4a7c15ull * (image_index + 1)));
    return Tensor({tokens, width}, rng.normal_vec(tokens * width));
}

// Sampling-time deltas relative to the run's base config.
struct VariantSpec {
    std::string name;
    double gamma = 0.0;
    sim::GateConfig gate;
    bool single_embed = false;
};

struct VariantResult {
    std::vector<MetricRow> rows;
    json info;
    std::vector<std::pair<std::string, synth::Image>> images;
};

VariantResult eval_variant(const VariantSpec& spec, const Corpus& corpus,
                           const pipe::Model& base_model, const ExperimentConfig& cfg) {
    pipe::Model model = base_model;  // shares parameter tensors, own config
    model.config.structure.gamma = spec.gamma;
    model.config.gate = spec.gate;

    const auto schedule = pipe::NoiseSchedule::linear(cfg.train.timesteps);
    const std::size_t up = cfg.corpus.image_size / cfg.backbone.latent_h;

    VariantResult result;
    result.info["name"] = spec.name;
    result.info["gamma"] = spec.gamma;
    result.info["alpha"] = spec.gate.alpha;
    result.info["single_embed"] = spec.single_embed;
    json images_info = json::array();

    for (std::size_t i = 0; i < corpus.eval_images.size(); ++i) {
        const auto& content = corpus.eval_images[i];
        const auto& style = corpus.styles[i % corpus.styles.size()];
        auto cond = make_conditions(content, style, corpus, cfg, spec.single_embed);
        Tensor x_noise = eval_noise(cfg, i, model.config.tokens(), model.config.width);
        Tensor x0 = pipe::sample(x_noise, cond, model, schedule);
        synth::Image out_small =
            pipe::decode(x0, model.config.latent_h, model.config.latent_w);
        synth::Image out = synth::upsample_nearest(out_small, up);

        const double alignment = synth::metric_structure_alignment(out, content.image);
        const double style_dist = synth::metric_style_distance(out, style);
        const auto matches = synth::metric_subject_match(out, content);

        for (std::size_t s = 0; s < matches.size(); ++s) {
            MetricRow row;
            row.experiment = cfg.kind;
            row.variant = spec.name;
            row.gamma = spec.gamma;
            row.alpha = spec.gate.alpha;
            row.k = cond.content.count();
            row.image_id = i;
            row.structure_alignment = alignment;
            row.style_distance = style_dist;
            row.subject_id = s;
            row.subject_match = matches[s];
            result.rows.push_back(row);
        }
        json img_info;
        img_info["image_id"] = i;
        img_info["noise_sha256"] = util::sha256_hex(x_noise.values());
        img_info["schedule"] = cond.schedule ? json(cond.schedule->assignment) : json();
        images_info.push_back(img_info);
        result.images.emplace_back("images/" + spec.name + "_img" + std::to_string(i) +
                                       ".ppm",
                                   out);
    }
    result.info["images"] = images_info;
    return result;
}

std::vector<VariantResult> eval_variants(const std::vector<VariantSpec>& specs,
                                         const Corpus& corpus,
                                         const pipe::Model& model,
                                         const ExperimentConfig& cfg) {
    std::vector<VariantResult> results(specs.size());
    const std::size_t threads = std::min(max_threads(), specs.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < specs.size(); ++i)
            results[i] = eval_variant(specs[i], corpus, model, cfg);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= specs.size()) return;
                results[i] = eval_variant(specs[i], corpus, model, cfg);
            }
        });
    for (auto& t : pool) t.join();
    return results;
}

struct PreparedModel {
    pipe::Model model;
    bool trained = false;
    train::TrainResult train_result;
    double train_seconds = 0.0;
};

PreparedModel prepare_model(const ExperimentConfig& cfg, const Corpus& corpus) {
    PreparedModel out{pipe::Model::init(cfg.backbone, cfg.seed)};
    if (!cfg.checkpoint.empty()) {
        if (!fs::exists(cfg.checkpoint))
            throw ConfigError("checkpoint not found: " + cfg.checkpoint);
        auto loaded = train::load_checkpoint(cfg.checkpoint);
        auto params = out.model.named_parameters();
        train::restore_parameters(params, loaded);
        return out;
    }
    if (cfg.train.steps == 0) return out;
    auto partition = train::ParameterPartition::preset(cfg.preset, out.model);
    auto dataset = build_dataset(corpus, cfg);
    const auto schedule = pipe::NoiseSchedule::linear(cfg.train.timesteps);
    const auto start = std::chrono::steady_clock::now();
    out.train_result =
        train::train(out.model, dataset, schedule, partition, cfg.train, cfg.preset);
    out.train_seconds = elapsed_s(start);
    out.trained = true;
    return out;
}

void append_variant_outputs(RunReport& report, const std::vector<VariantResult>& results) {
    json variants = json::array();
    for (const auto& r : results) {
        variants.push_back(r.info);
        report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
        report.images.insert(report.images.end(), r.images.begin(), r.images.end());
    }
    report.manifest["variants"] = variants;
}
}  // namespace

std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::string out =
        "experiment,variant,gamma,alpha,k,image_id,structure_alignment,"
        "style_distance,subject_id,subject_match\n";
    for (const auto& r : rows) {
        out += r.experiment + "," + r.variant + "," + fmt(r.gamma, "%.6g") + "," +
               fmt(r.alpha, "%.6g") + "," + std::to_string(r.k) + "," +
               std::to_string(r.image_id) + "," + fmt(r.structure_alignment) + "," +
               fmt(r.style_distance) + "," + std::to_string(r.subject_id) + "," +
               fmt(r.subject_match) + "\n";
    }
    return out;
}

std::size_t max_threads() {
    const char* env = std::getenv("ICAS_THREADS");
    if (!env) return 1;
    const long v = std::strtol(env, nullptr, 10);
    return v < 1 ? 1 : static_cast<std::size_t>(v);
}

Corpus build_corpus(const ExperimentConfig& cfg) {
    Corpus c;
    c.encoders = synth::Encoders::make(cfg.backbone.width,
                                       cfg.backbone.structure_channels,
                                       cfg.corpus.seed);
    for (std::size_t i = 0; i < cfg.corpus.train_images; ++i)
        c.train_images.push_back(synth::gen_content(cfg.corpus.seed + i,
                                                    cfg.corpus.subjects,
                                                    cfg.corpus.image_size));
    for (std::size_t i = 0; i < cfg.corpus.eval_images; ++i)
        c.eval_images.push_back(synth::gen_content(cfg.corpus.seed + 1000 + i,
                                                   cfg.corpus.subjects,
                                                   cfg.corpus.image_size));
    for (std::size_t j = 0; j < cfg.corpus.styles; ++j)
        c.styles.push_back(synth::render_style(
            synth::StyleSpec::from_seed(cfg.corpus.seed * 31 + j),
            cfg.corpus.image_size));
    return c;
}

pipe::Conditions make_conditions(const synth::SyntheticImage& content,
                                 const synth::Image& style, const Corpus& corpus,
                                 const ExperimentConfig& cfg, bool single_embed) {
    pipe::Conditions cond;
    if (single_embed) {
        cond.content.items.push_back(synth::encode_content(content.image, corpus.encoders));
        cond.content.origins.push_back("whole-image");
    } else {
        cond.content = cycle::extract_content_embeddings(content, cfg.corpus.embed_mode,
                                                         corpus.encoders);
    }
    cond.style = synth::encode_style(style, corpus.encoders);
    cond.structure = synth::encode_structure(content.image, corpus.encoders,
                                             cfg.backbone.latent_h,
                                             cfg.backbone.latent_w);
    cond.schedule = cycle::build_schedule(cond.content.count(), cfg.backbone.blocks);
    return cond;
}

train::Dataset build_dataset(const Corpus& corpus, const ExperimentConfig& cfg) {
    train::Dataset data;
    for (std::size_t i = 0; i < corpus.train_images.size(); ++i) {
        const auto& content = corpus.train_images[i];
        const auto& style = corpus.styles[i % corpus.styles.size()];
        train::TrainSample sample;
        sample.x0 = synth::encode_latent(content.image, corpus.encoders,
                                         cfg.backbone.latent_h, cfg.backbone.latent_w,
                                         cfg.backbone.width);
        sample.conditions = make_conditions(content, style, corpus, cfg, false);
        data.samples.push_back(std::move(sample));
    }
    return data;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto run_start = std::chrono::steady_clock::now();
    Corpus corpus = build_corpus(cfg);

    RunReport report;
    report.manifest["config"] = config_echo(cfg);

    PreparedModel prepared = prepare_model(cfg, corpus);
    const auto params = prepared.model.named_parameters();
    report.manifest["checkpoint_sha256"] =
        util::sha256_hex(train::checkpoint_bytes(params));
    if (prepared.trained) {
        report.checkpoint_blob = train::checkpoint_bytes(params);
        report.loss_curve_csv = train::loss_curve_csv(prepared.train_result.curve);
        report.manifest["train"] = {
            {"preset", prepared.train_result.preset},
            {"steps", cfg.train.steps},
            {"initial_loss", prepared.train_result.curve.front().loss},
            {"final_loss", prepared.train_result.curve.back().loss},
            {"wall_clock_s", prepared.train_seconds}};
    }

    const auto& base_gate = cfg.backbone.gate;
    const double base_gamma = cfg.backbone.structure.gamma;
    std::vector<VariantSpec> specs;

    if (cfg.kind == "train") {
        specs.push_back({"trained", base_gamma, base_gate, false});
    } else if (cfg.kind == "sample") {
        specs.push_back({"sample", base_gamma, base_gate, false});
    } else if (cfg.kind == "sweep-gamma") {
        for (double g : {0.0, 0.4, 0.5, 0.6, 0.7, 0.8})
            specs.push_back({"gamma-" + fmt(g, "%.1f"), g, base_gate, false});
    } else if (cfg.kind == "ablate-gate") {
        specs.push_back({"learned", base_gamma, sim::GateConfig::learned(base_gate.alpha),
                         false});
        specs.push_back({"no-gate", base_gamma,
                         sim::GateConfig::fixed(1.0, base_gate.alpha), false});
    } else if (cfg.kind == "ablate-embed") {
        specs.push_back({"multi-embed", base_gamma, base_gate, false});
        specs.push_back({"single-embed", base_gamma, base_gate, true});
    }

    if (cfg.kind == "compare-strategies") {
        json arms = json::array();
        std::vector<VariantResult> results;
        for (auto preset : {train::Preset::ContentOnly, train::Preset::FullFinetune,
                            train::Preset::NoFinetune}) {
            ExperimentConfig arm_cfg = cfg;
            arm_cfg.preset = preset;
            PreparedModel arm = prepare_model(arm_cfg, corpus);
            auto partition = train::ParameterPartition::preset(preset, arm.model);
            const std::string name = train::preset_name(preset);
            json arm_info;
            arm_info["preset"] = name;
            arm_info["trainable_tensors"] = partition.trainable_tensor_count();
            arm_info["trainable_scalars"] = partition.trainable_scalar_count(arm.model);
            arm_info["wall_clock_s"] = arm.train_seconds;
            const auto arm_params = arm.model.named_parameters();
            const std::string blob = train::checkpoint_bytes(arm_params);
            arm_info["checkpoint_sha256"] = util::sha256_hex(blob);
            report.extra_files.emplace_back("checkpoint_" + name + ".bin", blob);
            if (arm.trained) {
                arm_info["initial_loss"] = arm.train_result.curve.front().loss;
                arm_info["final_loss"] = arm.train_result.curve.back().loss;
                report.extra_files.emplace_back(
                    "loss_curve_" + name + ".csv",
                    train::loss_curve_csv(arm.train_result.curve));
            }
            arms.push_back(arm_info);
            VariantSpec spec{name, base_gamma, base_gate, false};
            results.push_back(eval_variant(spec, corpus, arm.model, cfg));
        }
        report.manifest["strategy_arms"] = arms;
        append_variant_outputs(report, results);
    } else {
        append_variant_outputs(report, eval_variants(specs, corpus, prepared.model, cfg));
    }

    report.manifest["experiment"] = cfg.kind;
    report.manifest["seed"] = cfg.seed;
    report.manifest["wall_clock_s"] = elapsed_s(run_start);
    return report;
}

namespace {
void atomic_write(const fs::path& path, const std::string& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for write");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}
}  // namespace

void emit_outputs(const RunReport& report, const std::string& out_dir) {
    fs::create_directories(out_dir);
    atomic_write(fs::path(out_dir) / "report.json", report.manifest.dump(2) + "\n");
    atomic_write(fs::path(out_dir) / "metrics.csv", metrics_csv(report.rows));
    if (!report.checkpoint_blob.empty())
        atomic_write(fs::path(out_dir) / "checkpoint.bin", report.checkpoint_blob);
    if (!report.loss_curve_csv.empty())
        atomic_write(fs::path(out_dir) / "loss_curve.csv", report.loss_curve_csv);
    for (const auto& [name, bytes] : report.extra_files)
        atomic_write(fs::path(out_dir) / name, bytes);
    if (!report.images.empty()) fs::create_directories(fs::path(out_dir) / "images");
    for (const auto& [rel, img] : report.images)
        atomic_write(fs::path(out_dir) / rel, synth::ppm_bytes(img));
}

}  // namespace icas::exp
