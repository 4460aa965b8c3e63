#pragma once

// Fixed-length audio context cache: silence-padded / truncated queue construction,
// a deterministic multi-level feature encoder, and trailing condition extraction.

#include "streamhead/numerics/array.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace streamhead::audio {

using AudioSamples = std::vector<float>;

struct AudioConfig {
    std::size_t sample_rate = 16000;
    double t_max_s = 8.0;
    std::size_t feature_rate = 25;
    std::size_t layers = 3;
    std::size_t feat_dim = 8;

    // Throws ContractViolation when the invariants below do not hold:
    // t_max * feature_rate and t_max * sample_rate integral, sample_rate % feature_rate == 0,
    // 1 <= layers <= 3, hop >= 2 * feat_dim.
    void validate() const;

    std::size_t hop() const { return sample_rate / feature_rate; }
    std::size_t queue_samples() const;
    std::size_t feature_frames() const; // S
};

struct AudioQueue {
    AudioSamples samples;
    std::size_t pad_len = 0;

    friend bool operator==(const AudioQueue &, const AudioQueue &) = default;
};

// features: (S, layers, feat_dim)
struct AudioFeatureSequence {
    numerics::Array features;

    std::size_t frames() const { return features.dim(0); }
};

// features: (N, layers, feat_dim); the trailing N rows of an AudioFeatureSequence.
struct ConditionWindow {
    numerics::Array features;
    std::size_t n_frames = 0;
};

AudioQueue build_queue(std::span<const float> raw, const AudioConfig & cfg);

// Layer 0: RMS of the whole hop followed by RMS over feat_dim-1 sub-windows.
// Layer 1: zero-crossing rate over feat_dim sub-windows.
// Layer 2: Goertzel amplitude at feat_dim log-spaced band centres.
AudioFeatureSequence encode(const AudioQueue & queue, const AudioConfig & cfg);

ConditionWindow extract_condition(const AudioFeatureSequence & e, std::size_t n);

// build_queue -> encode -> extract_condition, the one path used by training and inference.
ConditionWindow condition_from_history(std::span<const float> raw, const AudioConfig & cfg, std::size_t n);

// Rolling raw-audio history bounded to the trailing t_max seconds.
class RollingAudioCache {
public:
    explicit RollingAudioCache(const AudioConfig & cfg);

    std::size_t push(std::span<const float> samples);
    AudioQueue queue() const;

    // Samples currently retained (<= queue_samples()).
    std::size_t retained() const { return buffer_.size() - start_; }
    std::size_t total_pushed() const { return total_; }
    std::span<const float> view() const { return {buffer_.data() + start_, retained()}; }

private:
    std::size_t capacity_;
    std::vector<float> buffer_;
    std::size_t start_ = 0;
    std::size_t total_ = 0;
};

// Raw little-endian f32 mono PCM plus "<path>.meta" text sidecar (sample_rate, duration_s).
void write_pcm(const std::filesystem::path & path, std::span<const float> samples, std::size_t sample_rate);
struct PcmFile {
    AudioSamples samples;
    std::size_t sample_rate = 0;
};
PcmFile read_pcm(const std::filesystem::path & path);
std::filesystem::path meta_path(const std::filesystem::path & pcm_path);

} // namespace streamhead::audio
