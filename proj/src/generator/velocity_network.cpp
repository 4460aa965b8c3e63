#include "streamhead/generator/velocity_network.hpp"

#include "streamhead/errors.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace streamhead::generator {

using numerics::Array;
using numerics::Shape;
using numerics::Var;

namespace {

constexpr char kMagic[4] = {'S', 'H', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream & out, std::uint32_t v) { out.write(reinterpret_cast<const char *>(&v), sizeof v); }

std::uint32_t get_u32(std::istream & in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char *>(&v), sizeof v);
    if (!in) throw LoadError("truncated checkpoint");
    return v;
}

Array init_matrix(std::size_t rows, std::size_t cols, double gain, numerics::Rng & rng) {
    Array a(Shape{rows, cols});
    const double std = gain / std::sqrt(static_cast<double>(rows));
    for (double & v : a.data()) v = std * rng.normal();
    return a;
}

} // namespace

MotionContext MotionContext::single(const Array & frame) {
    return {frame.reshaped(Shape{1, frame.size()})};
}

MotionContext MotionContext::tail(const LatentChunk & chunk, std::size_t n) {
    STREAMHEAD_REQUIRE(n >= 1 && n <= chunk.n_frames(), "tail length out of range");
    return {chunk.frames.rows(chunk.n_frames() - n, chunk.n_frames())};
}

void ModelConfig::validate() const {
    STREAMHEAD_REQUIRE(channels >= kIdentityEnd, "need at least 5 latent channels (mouth + 4 identity)");
    STREAMHEAD_REQUIRE(chunk_frames >= 1 && motion_frames >= 1 && motion_frames <= chunk_frames,
                       "motion_frames must lie in [1, chunk_frames]");
    STREAMHEAD_REQUIRE(t_embed_dim >= 2 && t_embed_dim % 2 == 0, "t_embed_dim must be even");
    STREAMHEAD_REQUIRE(hidden >= 1 && audio_layers >= 1 && feat_dim >= 1, "sizes must be positive");
}

Array timestep_embedding(double t, std::size_t dim) {
    Array e(Shape{dim});
    for (std::size_t i = 0; i < dim / 2; ++i) {
        const double angle = 0.5 * std::numbers::pi * std::ldexp(1.0, static_cast<int>(i)) * t;
        e[2 * i] = std::sin(angle);
        e[2 * i + 1] = std::cos(angle);
    }
    return e;
}

Var condition_assemble(const Var & x_t, const Conditions & cond, double t, const ModelConfig & cfg) {
    STREAMHEAD_REQUIRE(x_t.value().rank() == 2 && x_t.shape()[1] == cfg.channels, "x_t must be (N, C)");
    const std::size_t n = x_t.shape()[0];
    STREAMHEAD_REQUIRE(cond.reference.channels.size() == cfg.channels, "missing or malformed reference latent");
    STREAMHEAD_REQUIRE(cond.motion.frames.rank() == 2 && cond.motion.frames.dim(0) >= 1 &&
                           cond.motion.frames.dim(1) == cfg.channels,
                       "missing or malformed motion context");
    const Array & audio = cond.audio.features;
    STREAMHEAD_REQUIRE(audio.rank() == 3 && audio.dim(0) == n && audio.dim(1) == cfg.audio_layers &&
                           audio.dim(2) == cfg.feat_dim,
                       "missing or malformed audio condition, got " + numerics::shape_str(audio.shape()));

    const Var parts[] = {
        x_t,
        numerics::repeat_rows(Var::constant(cond.reference.channels), n),
        numerics::repeat_rows(numerics::mean_rows(Var::constant(cond.motion.frames)), n),
        Var::constant(audio.reshaped(Shape{n, cfg.audio_layers * cfg.feat_dim})),
        numerics::repeat_rows(Var::constant(timestep_embedding(t, cfg.t_embed_dim)), n),
    };
    return numerics::concat_cols(parts);
}

Var VelocityModel::velocity(const Var & x_t, const Conditions & cond, double t) const {
    const VelocityQuery q{x_t, &cond, t};
    return velocity(std::span<const VelocityQuery>(&q, 1));
}

VelocityNetwork::VelocityNetwork(const ModelConfig & cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    numerics::Rng rng(seed);
    const std::size_t h = cfg_.hidden;
    params_.push_back(Var::parameter(init_matrix(cfg_.input_dim(), h, 1.0, rng)));
    params_.push_back(Var::parameter(Array::zeros(Shape{h})));
    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        params_.push_back(Var::parameter(init_matrix(h, h, 1.0, rng)));
        params_.push_back(Var::parameter(Array::zeros(Shape{h})));
        params_.push_back(Var::parameter(init_matrix(h, h, 0.5, rng)));
        params_.push_back(Var::parameter(Array::zeros(Shape{h})));
    }
    params_.push_back(Var::parameter(init_matrix(h, cfg_.channels, 0.1, rng)));
    params_.push_back(Var::parameter(Array::zeros(Shape{cfg_.channels})));
    params_.push_back(Var::parameter(init_matrix(h, cfg_.channels, 0.1, rng)));
    params_.push_back(Var::parameter(Array::zeros(Shape{cfg_.channels})));
}

Var VelocityNetwork::forward(const Var & input) const {
    STREAMHEAD_REQUIRE(input.value().rank() == 2 && input.shape()[1] == cfg_.input_dim(),
                       "network input must be (rows, " + std::to_string(cfg_.input_dim()) + ")");
    const std::size_t rows = input.shape()[0];
    auto affine = [rows](const Var & x, const Var & w, const Var & b) {
        return numerics::matmul(x, w) + numerics::repeat_rows(b, rows);
    };
    std::size_t p = 0;
    Var h = affine(input, params_[p], params_[p + 1]);
    p += 2;
    for (std::size_t b = 0; b < cfg_.blocks; ++b, p += 4) {
        Var inner = numerics::silu(affine(numerics::silu(h), params_[p], params_[p + 1]));
        h = h + affine(inner, params_[p + 2], params_[p + 3]);
    }
    const Var feat = numerics::silu(h);
    const Var x_t = numerics::slice_cols(input, 0, cfg_.channels);
    return affine(feat, params_[p], params_[p + 1]) + affine(feat, params_[p + 2], params_[p + 3]) * x_t;
}

Var VelocityNetwork::velocity(std::span<const VelocityQuery> queries) const {
    STREAMHEAD_REQUIRE(!queries.empty(), "no queries");
    std::vector<Var> inputs;
    inputs.reserve(queries.size());
    for (const auto & q : queries) {
        STREAMHEAD_REQUIRE(q.cond != nullptr, "query without conditions");
        inputs.push_back(condition_assemble(q.x_t, *q.cond, q.t, cfg_));
    }
    if (inputs.size() == 1) return forward(inputs[0]);
    return forward(numerics::concat_rows(inputs));
}

std::vector<Array> VelocityNetwork::parameter_values() const {
    std::vector<Array> out;
    out.reserve(params_.size());
    for (const auto & p : params_) out.push_back(p.value());
    return out;
}

void VelocityNetwork::set_parameter_values(std::span<const Array> values) {
    STREAMHEAD_REQUIRE(values.size() == params_.size(), "parameter count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) params_[i].assign(values[i]);
}

std::size_t VelocityNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto & p : params_) n += p.value().size();
    return n;
}

VelocityNetwork VelocityNetwork::clone() const {
    VelocityNetwork copy;
    copy.cfg_ = cfg_;
    for (const auto & p : params_) copy.params_.push_back(Var::parameter(p.value()));
    return copy;
}

void VelocityNetwork::save(const std::filesystem::path & path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    put_u32(out, kVersion);
    for (std::size_t v : {cfg_.channels, cfg_.chunk_frames, cfg_.motion_frames, cfg_.audio_layers, cfg_.feat_dim,
                          cfg_.t_embed_dim, cfg_.hidden, cfg_.blocks}) {
        put_u32(out, static_cast<std::uint32_t>(v));
    }
    put_u32(out, static_cast<std::uint32_t>(params_.size()));
    for (const auto & p : params_) {
        const Array & a = p.value();
        put_u32(out, static_cast<std::uint32_t>(a.rank()));
        for (std::size_t d : a.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char *>(a.data().data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
    }
    if (!out) throw LoadError("short write to " + path.string());
}

VelocityNetwork VelocityNetwork::load(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint " + path.string());
    char magic[4] = {};
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw LoadError("bad checkpoint magic");
    if (const auto v = get_u32(in); v != kVersion) throw LoadError("unsupported checkpoint version " + std::to_string(v));
    ModelConfig cfg;
    cfg.channels = get_u32(in);
    cfg.chunk_frames = get_u32(in);
    cfg.motion_frames = get_u32(in);
    cfg.audio_layers = get_u32(in);
    cfg.feat_dim = get_u32(in);
    cfg.t_embed_dim = get_u32(in);
    cfg.hidden = get_u32(in);
    cfg.blocks = get_u32(in);
    try {
        cfg.validate();
    } catch (const ContractViolation & e) {
        throw LoadError(std::string("checkpoint header invalid: ") + e.what());
    }

    // shapes must match a freshly built network of the same config
    VelocityNetwork net(cfg, 0);
    const std::uint32_t count = get_u32(in);
    if (count != net.params_.size()) throw LoadError("checkpoint parameter count mismatch");
    for (auto & p : net.params_) {
        const std::uint32_t rank = get_u32(in);
        Shape shape(rank);
        for (auto & d : shape) d = get_u32(in);
        if (shape != p.shape()) {
            throw LoadError("checkpoint parameter shape " + numerics::shape_str(shape) + " expected " +
                            numerics::shape_str(p.shape()));
        }
        Array a(shape);
        in.read(reinterpret_cast<char *>(a.data().data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
        if (!in) throw LoadError("truncated checkpoint payload");
        p.assign(std::move(a));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw LoadError("trailing bytes in checkpoint");
    return net;
}

VelocityNetwork VelocityNetwork::load(const std::filesystem::path & path, const ModelConfig & expected) {
    VelocityNetwork net = load(path);
    if (!(net.config() == expected)) throw LoadError("checkpoint config does not match session config");
    return net;
}

void sgd_step(std::span<const Var> params, const numerics::GradientMap & grads, double lr) {
    std::vector<Array> g;
    g.reserve(params.size());
    for (const auto & p : params) {
        g.push_back(grads[p]);
        if (!g.back().all_finite()) throw TrainingDivergence("non-finite gradient; step rejected");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Array v = params[i].value();
        auto d = v.data();
        for (std::size_t j = 0; j < d.size(); ++j) d[j] -= lr * g[i][j];
        // const handle to a shared node; the leaf value is the optimizer's to change
        Var(params[i]).assign(std::move(v));
    }
}

} // namespace streamhead::generator
