#pragma once

// Flow-matching objective, streaming-aware pre-training, and the Euler sampler.

#include "streamhead/generator/velocity_network.hpp"

#include <functional>
#include <optional>

namespace streamhead::generator {

// t * x1 + (1 - t) * x0
numerics::Array interpolate(const numerics::Array & x0, const numerics::Array & x1, double t);

struct FlowExample {
    numerics::Array x0; // noise endpoint (N, C)
    numerics::Array x1; // data endpoint (N, C)
    double t = 0.0;
    Conditions cond;
};

// Mean squared error between model(x_t) and the rectified-flow target x1 - x0 over every element of the batch.
numerics::Var flow_matching_loss(const VelocityModel & model, std::span<const FlowExample> batch);

struct MotionSamplingConfig {
    double p_full = 0.9;
    double p_single = 0.1;
    std::size_t n = 5;

    void validate() const;
};

// With p_full the first n rows of `gt`, otherwise only row 0.
MotionContext sample_motion_context(const numerics::Array & gt, const MotionSamplingConfig & cfg, numerics::Rng & rng);

// One pre-training example source: a ground-truth chunk with its aligned audio condition and
// the frames available as motion history (the n frames preceding the chunk, or the reference
// repeated n times for a session's first chunk).
struct TrainingChunk {
    LatentChunk target;
    numerics::Array motion_source;
    audio::ConditionWindow audio;
    ReferenceLatent reference;
};

std::vector<FlowExample> make_pretrain_batch(std::span<const TrainingChunk> pool, std::size_t batch_chunks,
                                             const MotionSamplingConfig & motion, numerics::Rng & rng);

// One gradient-descent step on the flow-matching loss. Returns the pre-step loss.
// Throws TrainingDivergence (parameters untouched) if loss or gradients are non-finite.
double pretrain_step(VelocityNetwork & net, std::span<const FlowExample> batch, double lr);

struct PretrainConfig {
    double lr = 0.5;
    double lr_final = 0.01; // cosine decay from lr to lr_final over `steps`
    std::size_t batch_chunks = 8;
    std::size_t steps = 2000;
    std::size_t eval_chunks = 64;
    std::uint64_t seed = 0;
    MotionSamplingConfig motion;
};

struct PretrainResult {
    std::vector<double> step_losses;
    double eval_loss_initial = 0.0;
    double eval_loss_final = 0.0;
};

double scheduled_lr(const PretrainConfig & cfg, std::size_t step);

// Fixed held-out batch (seeded separately from training draws) used for before/after comparison.
std::vector<FlowExample> make_eval_batch(std::span<const TrainingChunk> pool, const PretrainConfig & cfg);

PretrainResult pretrain(VelocityNetwork & net, std::span<const TrainingChunk> pool, const PretrainConfig & cfg,
                        const std::function<void(std::size_t step, double loss)> & on_step = {});

// Euler integration from t = 0 (noise) to t = 1 over a uniform grid of `steps`.
LatentChunk generate_chunk(const VelocityModel & model, const Conditions & cond, std::size_t steps, numerics::Rng & rng);
LatentChunk generate_chunk(const VelocityModel & model, const Conditions & cond, const numerics::Array & noise,
                           std::size_t steps);

// Same integration, recording a graph only for sampler step `retain_step` (if any). Every other
// network evaluation is detached, so the result's only gradient path to parameters is through
// that one step. Values are identical to generate_chunk for the same noise.
numerics::Var sample_chunk(const VelocityModel & model, const Conditions & cond, const numerics::Array & noise,
                           std::size_t steps, std::optional<std::size_t> retain_step);

} // namespace streamhead::generator
