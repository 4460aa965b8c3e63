#include "streamhead/generator/flow.hpp"

#include "streamhead/errors.hpp"

#include <cmath>
#include <numbers>

namespace streamhead::generator {

using numerics::Array;
using numerics::Shape;
using numerics::Var;

Array interpolate(const Array & x0, const Array & x1, double t) {
    STREAMHEAD_REQUIRE(x0.shape() == x1.shape(), "interpolate: shape mismatch");
    STREAMHEAD_REQUIRE(t >= 0.0 && t <= 1.0, "interpolate: t outside [0, 1]");
    Array out(x0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t * x1[i] + (1.0 - t) * x0[i];
    return out;
}

Var flow_matching_loss(const VelocityModel & model, std::span<const FlowExample> batch) {
    STREAMHEAD_REQUIRE(!batch.empty(), "empty batch");
    std::vector<VelocityQuery> queries;
    std::vector<Array> targets;
    queries.reserve(batch.size());
    targets.reserve(batch.size());
    for (const auto & ex : batch) {
        STREAMHEAD_REQUIRE(ex.x0.shape() == ex.x1.shape() && ex.x0.rank() == 2, "x0/x1 must share an (N, C) shape");
        queries.push_back({Var::constant(interpolate(ex.x0, ex.x1, ex.t)), &ex.cond, ex.t});
        Array u = ex.x1;
        for (std::size_t i = 0; i < u.size(); ++i) u[i] -= ex.x0[i];
        targets.push_back(std::move(u));
    }
    const Var predicted = model.velocity(queries);
    const Var target = Var::constant(numerics::concat_rows(std::span<const Array>(targets)));
    STREAMHEAD_REQUIRE(predicted.shape() == target.shape(), "model output shape differs from target");
    return numerics::mse(predicted, target);
}

void MotionSamplingConfig::validate() const {
    STREAMHEAD_REQUIRE(p_full >= 0.0 && p_single >= 0.0 && std::abs(p_full + p_single - 1.0) < 1e-12,
                       "p_full + p_single must equal 1");
    STREAMHEAD_REQUIRE(n >= 1, "n must be at least 1");
}

MotionContext sample_motion_context(const Array & gt, const MotionSamplingConfig & cfg, numerics::Rng & rng) {
    cfg.validate();
    STREAMHEAD_REQUIRE(gt.rank() == 2 && gt.dim(0) >= cfg.n,
                       "ground truth has fewer than n=" + std::to_string(cfg.n) + " frames");
    const bool full = rng.uniform() < cfg.p_full;
    return {gt.rows(0, full ? cfg.n : 1)};
}

std::vector<FlowExample> make_pretrain_batch(std::span<const TrainingChunk> pool, std::size_t batch_chunks,
                                             const MotionSamplingConfig & motion, numerics::Rng & rng) {
    STREAMHEAD_REQUIRE(!pool.empty(), "empty training pool");
    std::vector<FlowExample> batch;
    batch.reserve(batch_chunks);
    for (std::size_t b = 0; b < batch_chunks; ++b) {
        const TrainingChunk & c = pool[rng.uniform_index(0, pool.size() - 1)];
        FlowExample ex;
        ex.x1 = c.target.frames;
        ex.x0 = rng.normal_array(ex.x1.shape());
        ex.t = rng.uniform();
        ex.cond = {c.reference, sample_motion_context(c.motion_source, motion, rng), c.audio};
        batch.push_back(std::move(ex));
    }
    return batch;
}

double pretrain_step(VelocityNetwork & net, std::span<const FlowExample> batch, double lr) {
    const Var loss = flow_matching_loss(net, batch);
    const double value = loss.value().item();
    if (!std::isfinite(value)) throw TrainingDivergence("non-finite flow-matching loss; step rejected");
    const auto grads = numerics::backward(loss);
    sgd_step(net.parameters(), grads, lr);
    return value;
}

double scheduled_lr(const PretrainConfig & cfg, std::size_t step) {
    if (cfg.steps <= 1) return cfg.lr;
    const double progress = static_cast<double>(step) / static_cast<double>(cfg.steps - 1);
    return cfg.lr_final + (cfg.lr - cfg.lr_final) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<FlowExample> make_eval_batch(std::span<const TrainingChunk> pool, const PretrainConfig & cfg) {
    numerics::Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    return make_pretrain_batch(pool, cfg.eval_chunks, cfg.motion, rng);
}

PretrainResult pretrain(VelocityNetwork & net, std::span<const TrainingChunk> pool, const PretrainConfig & cfg,
                        const std::function<void(std::size_t, double)> & on_step) {
    PretrainResult result;
    const auto eval = make_eval_batch(pool, cfg);
    auto eval_loss = [&] {
        numerics::NoGradGuard guard;
        return flow_matching_loss(net, eval).value().item();
    };
    result.eval_loss_initial = eval_loss();
    numerics::Rng rng(cfg.seed);
    result.step_losses.reserve(cfg.steps);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const auto batch = make_pretrain_batch(pool, cfg.batch_chunks, cfg.motion, rng);
        const double loss = pretrain_step(net, batch, scheduled_lr(cfg, step));
        result.step_losses.push_back(loss);
        if (on_step) on_step(step, loss);
    }
    result.eval_loss_final = eval_loss();
    return result;
}

namespace {

Array euler_increment(const Array & v, double dt) {
    Array out(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * dt;
    return out;
}

} // namespace

Var sample_chunk(const VelocityModel & model, const Conditions & cond, const Array & noise, std::size_t steps,
                 std::optional<std::size_t> retain_step) {
    STREAMHEAD_REQUIRE(steps >= 1, "steps must be >= 1");
    STREAMHEAD_REQUIRE(!retain_step || *retain_step < steps, "retain_step outside the sampler grid");
    const double dt = 1.0 / static_cast<double>(steps);
    Var x = Var::constant(noise);
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) * dt;
        if (retain_step && s == *retain_step) {
            const Var xin = numerics::detach(x);
            x = xin + numerics::scale(model.velocity(xin, cond, t), dt);
            continue;
        }
        Array v;
        {
            numerics::NoGradGuard guard;
            v = model.velocity(numerics::detach(x), cond, t).value();
        }
        x = x + Var::constant(euler_increment(v, dt));
    }
    return x;
}

LatentChunk generate_chunk(const VelocityModel & model, const Conditions & cond, const Array & noise,
                           std::size_t steps) {
    numerics::NoGradGuard guard;
    return {sample_chunk(model, cond, noise, steps, std::nullopt).value()};
}

LatentChunk generate_chunk(const VelocityModel & model, const Conditions & cond, std::size_t steps,
                           numerics::Rng & rng) {
    const std::size_t n = cond.audio.n_frames;
    const std::size_t c = cond.reference.channels.size();
    return generate_chunk(model, cond, rng.normal_array(Shape{n, c}), steps);
}

} // namespace streamhead::generator
