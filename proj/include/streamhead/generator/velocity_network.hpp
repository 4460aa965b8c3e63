#pragma once

#include "streamhead/generator/types.hpp"
#include "streamhead/numerics/autodiff.hpp"
#include "streamhead/numerics/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace streamhead::generator {

struct ModelConfig {
    std::size_t channels = 8;
    std::size_t chunk_frames = 33;
    std::size_t motion_frames = 5;
    std::size_t audio_layers = 3;
    std::size_t feat_dim = 8;
    std::size_t t_embed_dim = 8;
    std::size_t hidden = 64;
    std::size_t blocks = 3;

    // x_t, reference, motion summary, audio features, timestep embedding
    std::size_t input_dim() const { return 3 * channels + audio_layers * feat_dim + t_embed_dim; }
    void validate() const;

    friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

// Sinusoidal embedding of t in [0, 1]: pairs (sin, cos) at angles (pi/2) * 2^i * t.
numerics::Array timestep_embedding(double t, std::size_t dim);

// Per-frame network input, columns in the fixed order
// [x_t | reference | mean(motion) | audio features (layers*dim) | t embedding].
numerics::Var condition_assemble(const numerics::Var & x_t, const Conditions & cond, double t, const ModelConfig & cfg);

struct VelocityQuery {
    numerics::Var x_t; // (N, C)
    const Conditions * cond = nullptr;
    double t = 0.0;
};

// Anything that predicts a flow velocity for a noisy chunk.
class VelocityModel {
public:
    virtual ~VelocityModel() = default;

    // Predictions for all queries, stacked by rows in query order.
    virtual numerics::Var velocity(std::span<const VelocityQuery> queries) const = 0;

    numerics::Var velocity(const numerics::Var & x_t, const Conditions & cond, double t) const;
};

// Residual MLP applied frame-wise: in -> hidden, `blocks` residual blocks, hidden -> C.
class VelocityNetwork final : public VelocityModel {
public:
    VelocityNetwork(const ModelConfig & cfg, std::uint64_t seed);

    using VelocityModel::velocity;
    numerics::Var velocity(std::span<const VelocityQuery> queries) const override;

    numerics::Var forward(const numerics::Var & input) const;

    const ModelConfig & config() const { return cfg_; }
    std::span<const numerics::Var> parameters() const { return params_; }
    std::vector<numerics::Array> parameter_values() const;
    void set_parameter_values(std::span<const numerics::Array> values);
    std::size_t parameter_count() const;

    // Independent copy with fresh parameter leaves.
    VelocityNetwork clone() const;

    void save(const std::filesystem::path & path) const;
    static VelocityNetwork load(const std::filesystem::path & path);
    // Throws LoadError if the checkpoint config differs from `expected`.
    static VelocityNetwork load(const std::filesystem::path & path, const ModelConfig & expected);

private:
    VelocityNetwork() = default;

    ModelConfig cfg_;
    std::vector<numerics::Var> params_;
};

// In-place gradient descent on parameter leaves; rejects non-finite gradients before touching anything.
void sgd_step(std::span<const numerics::Var> params, const numerics::GradientMap & grads, double lr);

} // namespace streamhead::generator
