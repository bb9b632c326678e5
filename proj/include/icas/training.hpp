#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "icas/pipeline.hpp"
#include "icas/tensor.hpp"

namespace icas::train {

using num::Tensor;

struct PartitionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ParamState { Frozen, Trainable };
enum class Preset { ContentOnly, FullFinetune, NoFinetune };

std::string preset_name(Preset p);
Preset preset_from_name(const std::string& name);

// Named-parameter -> {Frozen, Trainable} map realizing the hybrid freeze
// strategy. Covers every model parameter exactly once.
struct ParameterPartition {
    std::vector<std::pair<std::string, ParamState>> entries;

    static ParameterPartition preset(Preset preset, const pipe::Model& model);

    ParamState state(const std::string& name) const;
    // Sets requires_grad flags on the model's parameters accordingly.
    void apply(pipe::Model& model) const;
    std::size_t trainable_tensor_count() const;
    std::size_t trainable_scalar_count(const pipe::Model& model) const;
    std::vector<std::string> trainable_names() const;
};

struct TrainConfig {
    double learning_rate = 1e-3;  // constant, no schedule
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
    double lambda_gate = 1e-3;
    std::size_t batch_size = 4;
    std::size_t steps = 200;
    std::size_t timesteps = 8;  // T
    std::uint64_t seed = 42;
};

struct TrainSample {
    Tensor x0;  // clean latent {N, d}
    pipe::Conditions conditions;
};

struct Dataset {
    std::vector<TrainSample> samples;
};

struct BatchItem {
    const TrainSample* sample = nullptr;
    std::size_t t = 1;
    Tensor noise;  // {N, d}
};
using Batch = std::vector<BatchItem>;

struct LossParts {
    Tensor total;     // scalar, differentiable
    double mse = 0.0;
    double gate_reg = 0.0;
};

// MSE(eps_hat, noise) averaged over the batch plus
// lambda_gate * mean over learned gate entries of (g - 0.5)^2.
LossParts loss(const Batch& batch, const pipe::Model& model,
               const pipe::NoiseSchedule& schedule, const TrainConfig& cfg);

// Decoupled-weight-decay Adam with bias correction. State slots exist for
// exactly the Trainable set; a gradient on a Frozen parameter is a hard
// partition breach.
struct AdamState {
    struct Slot {
        std::vector<double> m, v;
    };
    std::map<std::string, Slot> slots;
    std::size_t step_count = 0;
};

void adam_step(pipe::Model& model, const ParameterPartition& partition,
               AdamState& state, const TrainConfig& cfg);

struct LossRow {
    std::size_t step;
    double loss, mse, gate_reg;
};

struct TrainResult {
    std::vector<LossRow> curve;
    std::string preset;
    std::map<std::string, std::string> init_hashes;   // name -> sha256 of values
    std::map<std::string, std::string> final_hashes;
};

TrainResult train(pipe::Model& model, const Dataset& data,
                  const pipe::NoiseSchedule& schedule,
                  const ParameterPartition& partition, const TrainConfig& cfg,
                  Preset preset_label = Preset::ContentOnly);

std::string loss_curve_csv(const std::vector<LossRow>& curve);

}  // namespace icas::train
