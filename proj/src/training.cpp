#include "icas/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "icas/rng.hpp"
#include "icas/sha256.hpp"

namespace icas::train {

using namespace icas::num;

std::string preset_name(Preset p) {
    switch (p) {
        case Preset::ContentOnly: return "content-only";
        case Preset::FullFinetune: return "full-finetune";
        case Preset::NoFinetune: return "no-finetune";
    }
    return "unknown";
}

Preset preset_from_name(const std::string& name) {
    if (name == "content-only") return Preset::ContentOnly;
    if (name == "full-finetune") return Preset::FullFinetune;
    if (name == "no-finetune") return Preset::NoFinetune;
    throw std::runtime_error("unknown training preset: " + name);
}

namespace {
bool is_content_adapter(const std::string& name) {
    return name.find("content_") != std::string::npos;
}
bool is_spm(const std::string& name) { return name.rfind("spm.", 0) == 0; }
bool is_sim_gate(const std::string& name) {
    return name == "sim.gate_w" || name == "sim.gate_b";
}
bool is_sim_style(const std::string& name) {
    return name == "sim.key_proj" || name == "sim.value_proj";
}
}  // namespace

ParameterPartition ParameterPartition::preset(Preset preset, const pipe::Model& model) {
    ParameterPartition part;
    for (const auto& [name, t] : model.named_parameters()) {
        ParamState state = ParamState::Frozen;
        switch (preset) {
            case Preset::NoFinetune:
                break;
            case Preset::ContentOnly:
                if (is_content_adapter(name) || is_sim_gate(name) || is_spm(name))
                    state = ParamState::Trainable;
                break;
            case Preset::FullFinetune:
                // all adapter parameters; backbone blocks stay frozen
                if (is_content_adapter(name) || is_sim_gate(name) || is_spm(name) ||
                    is_sim_style(name))
                    state = ParamState::Trainable;
                break;
        }
        part.entries.emplace_back(name, state);
    }
    return part;
}

ParamState ParameterPartition::state(const std::string& name) const {
    for (const auto& [n, s] : entries)
        if (n == name) return s;
    throw PartitionError("partition: unknown parameter " + name);
}

void ParameterPartition::apply(pipe::Model& model) const {
    auto params = model.named_parameters();
    if (params.size() != entries.size())
        throw PartitionError("partition: covers " + std::to_string(entries.size()) +
                             " parameters, model has " + std::to_string(params.size()));
    std::set<std::string> names;
    for (const auto& [n, s] : entries)
        if (!names.insert(n).second)
            throw PartitionError("partition: duplicate entry " + n);
    for (auto& [name, t] : params) {
        t.zero_grad();
        t.set_requires_grad(state(name) == ParamState::Trainable);
    }
}

std::size_t ParameterPartition::trainable_tensor_count() const {
    std::size_t n = 0;
    for (const auto& [name, s] : entries) n += s == ParamState::Trainable;
    return n;
}

std::size_t ParameterPartition::trainable_scalar_count(const pipe::Model& model) const {
    std::size_t n = 0;
    for (const auto& [name, t] : model.named_parameters())
        if (state(name) == ParamState::Trainable) n += t.size();
    return n;
}

std::vector<std::string> ParameterPartition::trainable_names() const {
    std::vector<std::string> out;
    for (const auto& [n, s] : entries)
        if (s == ParamState::Trainable) out.push_back(n);
    return out;
}

LossParts loss(const Batch& batch, const pipe::Model& model,
               const pipe::NoiseSchedule& schedule, const TrainConfig& cfg) {
    if (batch.empty()) throw ShapeError("loss: empty batch");
    Tensor mse_sum;
    std::vector<Tensor> gates;
    for (const auto& item : batch) {
        if (item.t < 1 || item.t > schedule.steps())
            throw ShapeError("loss: timestep " + std::to_string(item.t) +
                             " outside schedule");
        const double ab = schedule.alpha_bar[item.t];
        Tensor x_t = add(scale(item.sample->x0, std::sqrt(ab)),
                         scale(item.noise, std::sqrt(1.0 - ab)));
        auto fwd = pipe::forward(x_t, item.t, item.sample->conditions, model);
        Tensor diff = sub(fwd.eps_hat, item.noise);
        Tensor sample_mse = mean(mul(diff, diff));
        mse_sum = mse_sum.defined() ? add(mse_sum, sample_mse) : sample_mse;
        for (auto& g : fwd.gates) gates.push_back(g);
    }
    LossParts parts;
    Tensor mse = scale(mse_sum, 1.0 / double(batch.size()));
    parts.mse = mse.item();

    Tensor total = mse;
    if (cfg.lambda_gate > 0.0 && !gates.empty()) {
        Tensor sq_sum;
        std::size_t n_entries = 0;
        for (const auto& g : gates) {
            Tensor centered = sub(g, Tensor::full(g.shape(), 0.5));
            Tensor sq = sum(mul(centered, centered));
            sq_sum = sq_sum.defined() ? add(sq_sum, sq) : sq;
            n_entries += g.size();
        }
        Tensor reg = scale(sq_sum, 1.0 / double(n_entries));
        parts.gate_reg = reg.item();
        total = add(total, scale(reg, cfg.lambda_gate));
    }
    parts.total = total;
    if (!std::isfinite(parts.total.item()))
        throw NumericError("loss: non-finite total " +
                           std::to_string(parts.total.item()));
    return parts;
}

void adam_step(pipe::Model& model, const ParameterPartition& partition,
               AdamState& state, const TrainConfig& cfg) {
    auto params = model.named_parameters();
    state.step_count += 1;
    const double t = double(state.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [name, p] : params) {
        const bool trainable = partition.state(name) == ParamState::Trainable;
        if (!trainable) {
            if (p.has_grad())
                throw PartitionError("partition breach: frozen parameter " + name +
                                     " carries a gradient");
            if (state.slots.count(name))
                throw PartitionError("partition breach: optimizer state exists for "
                                     "frozen parameter " + name);
            continue;
        }
        auto& slot = state.slots[name];
        if (slot.m.empty()) {
            slot.m.assign(p.size(), 0.0);
            slot.v.assign(p.size(), 0.0);
        }
        const std::vector<double> grad =
            p.has_grad() ? p.grad() : std::vector<double>(p.size(), 0.0);
        auto& theta = p.mutable_values();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            theta[i] *= 1.0 - cfg.learning_rate * cfg.weight_decay;
            slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * grad[i];
            slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            const double m_hat = slot.m[i] / bc1;
            const double v_hat = slot.v[i] / bc2;
            theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
        p.zero_grad();
    }
}

TrainResult train(pipe::Model& model, const Dataset& data,
                  const pipe::NoiseSchedule& schedule,
                  const ParameterPartition& partition, const TrainConfig& cfg,
                  Preset preset_label) {
    if (data.samples.empty()) throw ShapeError("train: empty dataset");
    partition.apply(model);

    TrainResult result;
    result.preset = preset_name(preset_label);
    for (const auto& [name, p] : model.named_parameters())
        result.init_hashes[name] = util::sha256_hex(p.values());

    AdamState state;
    util::Rng rng(cfg.seed);
    const std::size_t n_tokens = model.config.tokens();
    const std::size_t d = model.config.width;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        Batch batch;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            BatchItem item;
            item.sample = &data.samples[rng.integer(0, data.samples.size() - 1)];
            item.t = rng.integer(1, schedule.steps());
            item.noise = Tensor({n_tokens, d}, rng.normal_vec(n_tokens * d));
            batch.push_back(std::move(item));
        }
        auto parts = loss(batch, model, schedule, cfg);
        num::backward(parts.total);
        adam_step(model, partition, state, cfg);
        result.curve.push_back({step, parts.total.item(), parts.mse, parts.gate_reg});
    }

    for (const auto& [name, p] : model.named_parameters())
        result.final_hashes[name] = util::sha256_hex(p.values());
    return result;
}

std::string loss_curve_csv(const std::vector<LossRow>& curve) {
    std::string out = "step,loss,mse,gate_reg\n";
    char buf[128];
    for (const auto& row : curve) {
        std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g\n", row.step, row.loss,
                      row.mse, row.gate_reg);
        out += buf;
    }
    return out;
}

}  // namespace icas::train
