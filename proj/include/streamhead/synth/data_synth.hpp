#pragma once

// Seeded synthetic (audio, latent video, reference) triples with known ground truth:
// channel 0 tracks the smoothed audio envelope, channels 1..4 hold the identity vector,
// the remaining channels follow an AR(1) pose process.

#include "streamhead/audio/audio_context.hpp"
#include "streamhead/generator/flow.hpp"
#include "streamhead/generator/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace streamhead::synth {

struct SynthSpec {
    std::uint64_t seed = 0;
    double duration_s = 10.0;
    std::size_t sample_rate = 16000;
    std::size_t fps = 25;
    std::size_t channels = 8;
    std::array<double, 4> identity{};
    double envelope_half_life = 0.5; // frames; 0 disables smoothing
    double noise_ar_coeff = 0.9;
    double pose_scale = 0.05;
    double envelope_gain = 2.0;
    double amplitude = 1.0; // 0 gives a silent sample

    void validate() const;
    std::size_t frames() const;
    std::size_t samples_per_frame() const { return sample_rate / fps; }

    // Spec with identity drawn uniformly from [-1, 1]^4 using `seed`.
    static SynthSpec random(std::uint64_t seed, double duration_s);
};

struct SynthSample {
    audio::AudioSamples audio;
    numerics::Array latents; // (frames, C)
    generator::ReferenceLatent ref;
    SynthSpec spec;
};

// Endless, seeded stream of sinusoid bursts separated by silences.
class BurstAudioGenerator {
public:
    BurstAudioGenerator(std::uint64_t seed, std::size_t sample_rate, double amplitude = 1.0);

    void fill(std::span<float> out);
    audio::AudioSamples next(std::size_t n);

private:
    void start_segment();

    numerics::Rng rng_;
    double rate_;
    double amplitude_;
    bool in_burst_ = false;
    std::size_t seg_len_ = 0;
    std::size_t seg_pos_ = 0;
    double freq_ = 0.0, level_ = 0.0, phase2_ = 0.0;
};

// RMS of each video frame's audio hop; the trailing partial frame is dropped.
std::vector<double> frame_rms(std::span<const float> audio, std::size_t sample_rate, std::size_t fps);
// One-pole exponential smoothing with the given half-life in frames, starting from zero.
std::vector<double> smooth_envelope(std::span<const double> rms, double half_life_frames);
// gain * smooth_envelope(frame_rms(...)): the mouth-channel trajectory implied by `audio`.
std::vector<double> mouth_envelope(std::span<const float> audio, const SynthSpec & spec);

// Neutral mouth and pose, identity channels set.
generator::ReferenceLatent reference_for(const std::array<double, 4> & identity, std::size_t channels);

SynthSample generate_sample(const SynthSpec & spec);

struct DatasetChunk {
    generator::TrainingChunk train;
    std::size_t audio_end = 0;        // samples of history a live session has seen when generating this chunk
    generator::MotionContext gt_motion; // context a live session would use if all previous chunks were exact
};

// Non-overlapping N-frame chunks, each with the audio condition a live session would compute
// at the same timestamp (same build_queue -> encode -> extract_condition path).
std::vector<DatasetChunk> chunk_dataset(const SynthSample & sample, const audio::AudioConfig & cfg,
                                        std::size_t chunk_frames, std::size_t motion_frames);

audio::AudioQueue queue_snapshot(const SynthSample & sample, const DatasetChunk & chunk, const audio::AudioConfig & cfg);

// Pre-training pool over `count` random specs derived from `seed`.
std::vector<generator::TrainingChunk> training_pool(std::uint64_t seed, std::size_t count, double duration_s,
                                                    const audio::AudioConfig & cfg, std::size_t chunk_frames,
                                                    std::size_t motion_frames);

} // namespace streamhead::synth
