#pragma once

#include "streamhead/audio/audio_context.hpp"
#include "streamhead/numerics/array.hpp"

#include <cstddef>

namespace streamhead::generator {

// Latent channel roles.
inline constexpr std::size_t kMouthChannel = 0;
inline constexpr std::size_t kIdentityBegin = 1;
inline constexpr std::size_t kIdentityEnd = 5; // exclusive
inline constexpr std::size_t kIdentityChannels = kIdentityEnd - kIdentityBegin;

// (N, C) contiguous latent frames: the unit of autoregressive generation.
struct LatentChunk {
    numerics::Array frames;

    std::size_t n_frames() const { return frames.dim(0); }
    std::size_t channels() const { return frames.dim(1); }
};

// (n_ctx, C) motion frames used as temporal context.
struct MotionContext {
    numerics::Array frames;

    std::size_t n_ctx() const { return frames.dim(0); }
    // Motion context made of a single reference frame (cold start).
    static MotionContext single(const numerics::Array & frame);
    // The last n frames of a chunk.
    static MotionContext tail(const LatentChunk & chunk, std::size_t n);
};

// (C) latent of the reference image; constant for a session.
struct ReferenceLatent {
    numerics::Array channels;
};

struct Conditions {
    ReferenceLatent reference;
    MotionContext motion;
    audio::ConditionWindow audio;
};

} // namespace streamhead::generator
