#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "icas/checkpoint.hpp"
#include "icas/rng.hpp"
#include "icas/sha256.hpp"
#include "icas/training.hpp"

using namespace icas::train;
using namespace icas::num;
using icas::util::Rng;
namespace bb = ::icas::pipe;

namespace {
bb::BackboneConfig tiny_config(std::size_t d = 4) {
    bb::BackboneConfig c;
    c.latent_h = 2;
    c.latent_w = 2;
    c.width = d;
    c.blocks = 2;
    c.style_tokens = 1;
    c.gate = icas::sim::GateConfig::learned(0.5);
    return c;
}

bb::Conditions make_conditions(std::size_t d, Rng& rng, std::size_t k,
                                 std::size_t blocks) {
    bb::Conditions cond;
    for (std::size_t i = 0; i < k; ++i) {
        cond.content.items.push_back(
            icas::sim::Embedding{Tensor({d}, rng.normal_vec(d))});
        cond.content.origins.push_back("subject:" + std::to_string(i));
    }
    cond.style = icas::sim::Embedding{Tensor({d}, rng.normal_vec(d))};
    if (k > 1) cond.schedule = icas::cycle::build_schedule(k, blocks);
    return cond;
}

Dataset make_dataset(const bb::BackboneConfig& cfg, std::size_t n, Rng& rng) {
    Dataset data;
    for (std::size_t i = 0; i < n; ++i) {
        TrainSample s;
        s.x0 = Tensor({cfg.tokens(), cfg.width}, rng.normal_vec(cfg.tokens() * cfg.width));
        s.conditions = make_conditions(cfg.width, rng, 2, cfg.blocks);
        data.samples.push_back(std::move(s));
    }
    return data;
}
}  // namespace

TEST_CASE("preset names round-trip") {
    for (Preset p : {Preset::ContentOnly, Preset::FullFinetune, Preset::NoFinetune})
        CHECK(preset_from_name(preset_name(p)) == p);
    CHECK_THROWS(preset_from_name("half-finetune"));
}

TEST_CASE("partition presets cover every parameter with the right states") {
    auto model = bb::Model::init(tiny_config(), 1);
    const auto params = model.named_parameters();

    auto content = ParameterPartition::preset(Preset::ContentOnly, model);
    auto full = ParameterPartition::preset(Preset::FullFinetune, model);
    auto none = ParameterPartition::preset(Preset::NoFinetune, model);
    CHECK(content.entries.size() == params.size());

    for (const auto& [name, t] : params) {
        const bool adapter = name.find("content_") != std::string::npos ||
                             name == "sim.gate_w" || name == "sim.gate_b" ||
                             name.rfind("spm.", 0) == 0;
        const bool style = name == "sim.key_proj" || name == "sim.value_proj";
        CHECK(none.state(name) == ParamState::Frozen);
        CHECK(content.state(name) ==
              (adapter ? ParamState::Trainable : ParamState::Frozen));
        CHECK(full.state(name) ==
              (adapter || style ? ParamState::Trainable : ParamState::Frozen));
        if (name.find("attn_") != std::string::npos ||
            name.find("mlp_") != std::string::npos)
            CHECK(full.state(name) == ParamState::Frozen);  // backbone never trains
    }

    CHECK(none.trainable_scalar_count(model) == 0);
    CHECK(content.trainable_scalar_count(model) <
          full.trainable_scalar_count(model));
    CHECK(content.trainable_scalar_count(model) > 0);
    CHECK_THROWS_AS(content.state("not_a_parameter"), PartitionError);
}

TEST_CASE("loss matches a straight-line recomputation of its parts") {
    auto cfg = tiny_config();
    auto model = bb::Model::init(cfg, 3);
    auto schedule = bb::NoiseSchedule::linear(4);
    TrainConfig tc;
    tc.lambda_gate = 1e-3;

    Rng rng(5);
    Dataset data = make_dataset(cfg, 2, rng);
    Batch batch;
    for (std::size_t i = 0; i < 2; ++i) {
        BatchItem item;
        item.sample = &data.samples[i];
        item.t = i + 1;
        item.noise = Tensor({cfg.tokens(), cfg.width},
                            rng.normal_vec(cfg.tokens() * cfg.width));
        batch.push_back(std::move(item));
    }
    auto parts = loss(batch, model, schedule, tc);

    double mse_acc = 0.0, reg_acc = 0.0;
    std::size_t gate_entries = 0;
    for (const auto& item : batch) {
        const double ab = schedule.alpha_bar[item.t];
        Tensor x_t = add(scale(item.sample->x0, std::sqrt(ab)),
                         scale(item.noise, std::sqrt(1.0 - ab)));
        auto fwd = bb::forward(x_t, item.t, item.sample->conditions, model);
        double se = 0.0;
        for (std::size_t i = 0; i < fwd.eps_hat.size(); ++i) {
            const double dv = fwd.eps_hat[i] - item.noise[i];
            se += dv * dv;
        }
        mse_acc += se / double(fwd.eps_hat.size());
        for (const auto& g : fwd.gates)
            for (std::size_t i = 0; i < g.size(); ++i) {
                reg_acc += (g[i] - 0.5) * (g[i] - 0.5);
                ++gate_entries;
            }
    }
    const double mse = mse_acc / 2.0;
    const double reg = reg_acc / double(gate_entries);
    CHECK(std::fabs(parts.mse - mse) < 1e-12);
    CHECK(std::fabs(parts.gate_reg - reg) < 1e-12);
    CHECK(std::fabs(parts.total.item() - (mse + tc.lambda_gate * reg)) < 1e-12);
}

TEST_CASE("loss vanishes when the network output is the true noise") {
    auto cfg = tiny_config();
    auto model = bb::Model::init(cfg, 6);
    auto schedule = bb::NoiseSchedule::linear(2);
    TrainConfig tc;
    tc.lambda_gate = 0.0;

    // pick x_t first, read off eps_hat, then choose (x0, noise) consistent
    // with it so the network is exactly right by construction
    Rng rng(8);
    Tensor x_t({cfg.tokens(), cfg.width}, rng.normal_vec(cfg.tokens() * cfg.width));
    bb::Conditions cond = make_conditions(cfg.width, rng, 2, cfg.blocks);
    const std::size_t t = 1;
    Tensor eps = bb::forward(x_t, t, cond, model).eps_hat;
    const double ab = schedule.alpha_bar[t];
    TrainSample s;
    s.x0 = scale(sub(x_t, scale(eps, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
    s.conditions = cond;
    Batch batch;
    batch.push_back({&s, t, eps});
    auto parts = loss(batch, model, schedule, tc);
    CHECK(parts.total.item() < 1e-18);
}

TEST_CASE("gate regularizer is exactly zero at the neutral initialization") {
    auto cfg = tiny_config();
    auto model = bb::Model::init(cfg, 1);  // zero gate weights -> g = 0.5
    auto schedule = bb::NoiseSchedule::linear(4);
    TrainConfig tc;
    Rng rng(2);
    Dataset data = make_dataset(cfg, 1, rng);
    Batch batch;
    batch.push_back({&data.samples[0], 2,
                     Tensor({cfg.tokens(), cfg.width},
                            rng.normal_vec(cfg.tokens() * cfg.width))});
    auto parts = loss(batch, model, schedule, tc);
    CHECK(parts.gate_reg == 0.0);
    CHECK(parts.total.item() == parts.mse);
}

TEST_CASE("adam step matches the hand-computed bias-corrected update") {
    auto cfg = tiny_config(/*d=*/1);
    auto model = bb::Model::init(cfg, 2);
    auto part = ParameterPartition::preset(Preset::ContentOnly, model);
    part.apply(model);

    TrainConfig tc;
    tc.learning_rate = 0.1;
    tc.weight_decay = 0.0;
    model.sim_params.gate_b.mutable_values()[0] = 1.0;
    backward(sum(model.sim_params.gate_b));  // gradient exactly 1
    AdamState state;
    adam_step(model, part, state, tc);

    // m_hat = 1, v_hat = 1 after bias correction at step 1
    const double want = 1.0 - 0.1 / (1.0 + tc.eps);
    CHECK(std::fabs(model.sim_params.gate_b[0] - want) < 1e-15);
    CHECK(model.sim_params.gate_b[0] == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(state.slots.count("sim.gate_b") == 1);
    CHECK(state.slots.count("sim.key_proj") == 0);  // frozen: no slot
}

TEST_CASE("zero-gradient trainable parameter undergoes pure decoupled decay") {
    auto cfg = tiny_config();
    auto model = bb::Model::init(cfg, 2);
    auto part = ParameterPartition::preset(Preset::ContentOnly, model);
    part.apply(model);

    TrainConfig tc;
    tc.learning_rate = 0.1;
    tc.weight_decay = 0.01;
    model.sim_params.gate_b.mutable_values()[0] = 2.0;
    const auto frozen_before = model.sim_params.key_proj.values();
    AdamState state;
    adam_step(model, part, state, tc);
    CHECK(model.sim_params.gate_b[0] == 2.0 * (1.0 - 0.1 * 0.01));
    CHECK(model.sim_params.key_proj.values() == frozen_before);
}

TEST_CASE("partition breaches are hard errors") {
    auto cfg = tiny_config();
    auto model = bb::Model::init(cfg, 2);
    auto part = ParameterPartition::preset(Preset::ContentOnly, model);
    part.apply(model);
    TrainConfig tc;

    // gradient smuggled onto a frozen parameter
    model.sim_params.key_proj.set_requires_grad(true);
    backward(sum(model.sim_params.key_proj));
    AdamState state;
    CHECK_THROWS_AS(adam_step(model, part, state, tc), PartitionError);

    // optimizer slot for a frozen parameter
    auto model2 = bb::Model::init(cfg, 2);
    part.apply(model2);
    AdamState bad;
    bad.slots["block0.attn_q"];
    CHECK_THROWS_AS(adam_step(model2, part, bad, tc), PartitionError);

    // partition that does not cover the model
    ParameterPartition incomplete;
    incomplete.entries.emplace_back("sim.gate_b", ParamState::Trainable);
    CHECK_THROWS_AS(incomplete.apply(model), PartitionError);
}

TEST_CASE("no-finetune training moves nothing and keeps loss reproducible") {
    auto cfg = tiny_config();
    auto model = bb::Model::init(cfg, 4);
    auto schedule = bb::NoiseSchedule::linear(4);
    auto part = ParameterPartition::preset(Preset::NoFinetune, model);
    TrainConfig tc;
    tc.steps = 5;
    tc.batch_size = 2;
    Rng rng(9);
    Dataset data = make_dataset(cfg, 2, rng);

    Batch probe;
    probe.push_back({&data.samples[0], 1,
                     Tensor({cfg.tokens(), cfg.width},
                            rng.normal_vec(cfg.tokens() * cfg.width))});
    const double before = loss(probe, model, schedule, tc).total.item();

    auto result = train(model, data, schedule, part, tc, Preset::NoFinetune);
    CHECK(result.preset == "no-finetune");
    CHECK(result.init_hashes == result.final_hashes);  // nothing moved
    CHECK(loss(probe, model, schedule, tc).total.item() == before);
}

TEST_CASE("content-only training leaves frozen parameters bit-identical") {
    auto cfg = tiny_config();
    auto model = bb::Model::init(cfg, 11);
    auto schedule = bb::NoiseSchedule::linear(4);
    auto part = ParameterPartition::preset(Preset::ContentOnly, model);
    TrainConfig tc;
    tc.steps = 20;
    tc.batch_size = 2;
    Rng rng(13);
    Dataset data = make_dataset(cfg, 3, rng);
    auto result = train(model, data, schedule, part, tc, Preset::ContentOnly);

    bool any_moved = false;
    for (const auto& [name, state] : part.entries) {
        if (state == ParamState::Frozen)
            CHECK(result.init_hashes.at(name) == result.final_hashes.at(name));
        else
            any_moved |= result.init_hashes.at(name) != result.final_hashes.at(name);
    }
    CHECK(any_moved);
}

TEST_CASE("training is deterministic: identical checkpoints byte-for-byte") {
    auto cfg = tiny_config();
    auto schedule = bb::NoiseSchedule::linear(4);
    TrainConfig tc;
    tc.steps = 8;
    tc.batch_size = 2;
    auto run = [&] {
        auto model = bb::Model::init(cfg, 21);
        auto part = ParameterPartition::preset(Preset::ContentOnly, model);
        Rng rng(31);
        Dataset data = make_dataset(cfg, 2, rng);
        auto result = train(model, data, schedule, part, tc, Preset::ContentOnly);
        return std::make_pair(checkpoint_bytes(model.named_parameters()),
                              loss_curve_csv(result.curve));
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("descent sanity: small-lr full-batch training does not increase loss") {
    auto cfg = tiny_config();
    auto model = bb::Model::init(cfg, 17);
    auto schedule = bb::NoiseSchedule::linear(4);
    auto part = ParameterPartition::preset(Preset::ContentOnly, model);
    part.apply(model);
    TrainConfig tc;
    tc.learning_rate = 1e-4;
    tc.weight_decay = 0.0;

    Rng rng(23);
    Dataset data = make_dataset(cfg, 1, rng);
    Batch batch;
    batch.push_back({&data.samples[0], 2,
                     Tensor({cfg.tokens(), cfg.width},
                            rng.normal_vec(cfg.tokens() * cfg.width))});

    AdamState state;
    const double initial = loss(batch, model, schedule, tc).total.item();
    double final_loss = initial;
    for (int step = 0; step < 50; ++step) {
        auto parts = loss(batch, model, schedule, tc);
        backward(parts.total);
        adam_step(model, part, state, tc);
        final_loss = parts.total.item();
    }
    CHECK(final_loss <= initial);
}

TEST_CASE("regularizer gradient touches only the style gate parameters") {
    auto cfg = tiny_config();
    auto schedule = bb::NoiseSchedule::linear(4);
    auto grads_with = [&](double lambda) {
        auto model = bb::Model::init(cfg, 29);
        // move the gate off neutral so the regularizer has signal
        model.sim_params.gate_b.mutable_values()[0] = 0.3;
        auto part = ParameterPartition::preset(Preset::ContentOnly, model);
        part.apply(model);
        TrainConfig tc;
        tc.lambda_gate = lambda;
        Rng rng(37);
        Dataset data = make_dataset(cfg, 1, rng);
        Batch batch;
        batch.push_back({&data.samples[0], 1,
                         Tensor({cfg.tokens(), cfg.width},
                                rng.normal_vec(cfg.tokens() * cfg.width))});
        backward(loss(batch, model, schedule, tc).total);
        std::vector<std::pair<std::string, std::vector<double>>> grads;
        for (const auto& [name, p] : model.named_parameters())
            if (p.has_grad()) grads.emplace_back(name, p.grad());
        return grads;
    };
    auto g0 = grads_with(0.0);
    auto g1 = grads_with(1e-3);
    REQUIRE(g0.size() == g1.size());
    for (std::size_t i = 0; i < g0.size(); ++i) {
        REQUIRE(g0[i].first == g1[i].first);
        const bool gate_param =
            g0[i].first == "sim.gate_w" || g0[i].first == "sim.gate_b";
        if (gate_param)
            CHECK(g0[i].second != g1[i].second);
        else
            CHECK(g0[i].second == g1[i].second);
    }
}

TEST_CASE("checkpoint round-trips and detects corruption") {
    auto cfg = tiny_config();
    auto model = bb::Model::init(cfg, 41);
    auto params = model.named_parameters();
    auto bytes = checkpoint_bytes(params);
    CHECK(bytes.substr(0, 6) == "ICAS1\n");

    auto loaded = parse_checkpoint(bytes);
    REQUIRE(loaded.size() == params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        CHECK(loaded[i].first == params[i].first);
        CHECK(loaded[i].second.shape() == params[i].second.shape());
        CHECK(loaded[i].second.values() == params[i].second.values());
    }

    auto corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0x40;
    CHECK_THROWS(parse_checkpoint(corrupt));
    CHECK_THROWS(parse_checkpoint("NOPE1\n"));
    CHECK_THROWS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)));

    // restore into a fresh model with different values
    auto other = bb::Model::init(cfg, 99);
    auto target = other.named_parameters();
    restore_parameters(target, loaded);
    for (std::size_t i = 0; i < target.size(); ++i)
        CHECK(target[i].second.values() == params[i].second.values());

    auto mismatched = loaded;
    mismatched[0].first = "renamed";
    CHECK_THROWS(restore_parameters(target, mismatched));
}

TEST_CASE("checkpoint file save/load round-trip") {
    auto cfg = tiny_config();
    auto model = bb::Model::init(cfg, 5);
    const std::string path = "/tmp/icas_test_ckpt.bin";
    save_checkpoint(model.named_parameters(), path);
    auto loaded = load_checkpoint(path);
    auto bytes = checkpoint_bytes(model.named_parameters());
    CHECK(checkpoint_bytes(loaded) == bytes);
}

TEST_CASE("loss curve CSV carries the contract header") {
    std::vector<LossRow> curve = {{0, 1.5, 1.25, 0.25}, {1, 1.0, 0.75, 0.25}};
    auto csv = loss_curve_csv(curve);
    CHECK(csv.rfind("step,loss,mse,gate_reg\n", 0) == 0);
    CHECK(csv.find("0,1.5,1.25,0.25\n") != std::string::npos);
    CHECK(csv.find("1,1,0.75,0.25\n") != std::string::npos);
}
