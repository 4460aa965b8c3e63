#include "streamhead/synth/data_synth.hpp"

#include "streamhead/errors.hpp"

#include <cmath>
#include <numbers>

namespace streamhead::synth {

using numerics::Array;
using numerics::Shape;

void SynthSpec::validate() const {
    STREAMHEAD_REQUIRE(fps > 0 && sample_rate % fps == 0, "sample_rate must be divisible by fps");
    const double f = static_cast<double>(fps) * duration_s;
    STREAMHEAD_REQUIRE(duration_s >= 0.0 && std::abs(f - std::round(f)) < 1e-9, "fps * duration_s must be integral");
    STREAMHEAD_REQUIRE(std::abs(noise_ar_coeff) < 1.0, "|noise_ar_coeff| must be < 1");
    STREAMHEAD_REQUIRE(channels >= generator::kIdentityEnd, "need at least 5 channels");
    STREAMHEAD_REQUIRE(envelope_half_life >= 0.0, "half-life must be non-negative");
}

std::size_t SynthSpec::frames() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(fps) * duration_s));
}

SynthSpec SynthSpec::random(std::uint64_t seed, double duration_s) {
    SynthSpec s;
    s.seed = seed;
    s.duration_s = duration_s;
    numerics::Rng rng(seed ^ 0x5bd1e995ULL);
    for (double & v : s.identity) v = rng.uniform(-1.0, 1.0);
    return s;
}

BurstAudioGenerator::BurstAudioGenerator(std::uint64_t seed, std::size_t sample_rate, double amplitude)
    : rng_(seed), rate_(static_cast<double>(sample_rate)), amplitude_(amplitude) {
    start_segment();
}

void BurstAudioGenerator::start_segment() {
    in_burst_ = !in_burst_;
    seg_pos_ = 0;
    if (in_burst_) {
        seg_len_ = static_cast<std::size_t>(rng_.uniform(0.15, 0.6) * rate_);
        freq_ = rng_.uniform(120.0, 500.0);
        level_ = rng_.uniform(0.2, 0.6) * amplitude_;
        phase2_ = rng_.uniform(0.0, 2.0 * std::numbers::pi);
    } else {
        seg_len_ = static_cast<std::size_t>(rng_.uniform(0.05, 0.4) * rate_);
    }
    seg_len_ = std::max<std::size_t>(seg_len_, 1);
}

void BurstAudioGenerator::fill(std::span<float> out) {
    for (float & s : out) {
        if (seg_pos_ >= seg_len_) start_segment();
        if (in_burst_) {
            const double tau = static_cast<double>(seg_pos_) / rate_;
            const double w = std::sin(std::numbers::pi * static_cast<double>(seg_pos_) / static_cast<double>(seg_len_));
            const double phase = 2.0 * std::numbers::pi * freq_ * tau;
            s = static_cast<float>(level_ * w * w * (std::sin(phase) + 0.3 * std::sin(2.0 * phase + phase2_)));
        } else {
            s = 0.0F;
        }
        ++seg_pos_;
    }
}

audio::AudioSamples BurstAudioGenerator::next(std::size_t n) {
    audio::AudioSamples out(n);
    fill(out);
    return out;
}

std::vector<double> frame_rms(std::span<const float> audio, std::size_t sample_rate, std::size_t fps) {
    STREAMHEAD_REQUIRE(fps > 0 && sample_rate % fps == 0, "sample_rate must be divisible by fps");
    const std::size_t hop = sample_rate / fps;
    std::vector<double> out(audio.size() / hop);
    for (std::size_t f = 0; f < out.size(); ++f) {
        double acc = 0.0;
        for (std::size_t i = f * hop; i < (f + 1) * hop; ++i) acc += static_cast<double>(audio[i]) * audio[i];
        out[f] = std::sqrt(acc / static_cast<double>(hop));
    }
    return out;
}

std::vector<double> smooth_envelope(std::span<const double> rms, double half_life_frames) {
    const double alpha = half_life_frames > 0.0 ? std::pow(0.5, 1.0 / half_life_frames) : 0.0;
    std::vector<double> out(rms.size());
    double e = 0.0;
    for (std::size_t i = 0; i < rms.size(); ++i) {
        e = alpha * e + (1.0 - alpha) * rms[i];
        out[i] = e;
    }
    return out;
}

std::vector<double> mouth_envelope(std::span<const float> audio, const SynthSpec & spec) {
    auto env = smooth_envelope(frame_rms(audio, spec.sample_rate, spec.fps), spec.envelope_half_life);
    for (double & v : env) v *= spec.envelope_gain;
    return env;
}

generator::ReferenceLatent reference_for(const std::array<double, 4> & identity, std::size_t channels) {
    Array ref(Shape{channels});
    for (std::size_t i = 0; i < generator::kIdentityChannels; ++i) ref[generator::kIdentityBegin + i] = identity[i];
    return {std::move(ref)};
}

SynthSample generate_sample(const SynthSpec & spec) {
    spec.validate();
    SynthSample out;
    out.spec = spec;
    const std::size_t frames = spec.frames();
    BurstAudioGenerator gen(spec.seed, spec.sample_rate, spec.amplitude);
    out.audio = gen.next(frames * spec.samples_per_frame());

    const auto mouth = mouth_envelope(out.audio, spec);
    out.latents = Array(Shape{frames, spec.channels});
    numerics::Rng pose_rng(spec.seed ^ 0xa0761d6478bd642fULL);
    const std::size_t pose_channels = spec.channels - generator::kIdentityEnd;
    std::vector<double> pose(pose_channels);
    const double a = spec.noise_ar_coeff;
    const double innovation = std::sqrt(1.0 - a * a) * spec.pose_scale;
    for (double & p : pose) p = spec.pose_scale * pose_rng.normal();
    for (std::size_t f = 0; f < frames; ++f) {
        out.latents.at(f, generator::kMouthChannel) = mouth[f];
        for (std::size_t i = 0; i < generator::kIdentityChannels; ++i) {
            out.latents.at(f, generator::kIdentityBegin + i) = spec.identity[i];
        }
        for (std::size_t p = 0; p < pose_channels; ++p) {
            if (f > 0) pose[p] = a * pose[p] + innovation * pose_rng.normal();
            out.latents.at(f, generator::kIdentityEnd + p) = pose[p];
        }
    }
    out.ref = reference_for(spec.identity, spec.channels);
    return out;
}

std::vector<DatasetChunk> chunk_dataset(const SynthSample & sample, const audio::AudioConfig & cfg,
                                        std::size_t chunk_frames, std::size_t motion_frames) {
    cfg.validate();
    STREAMHEAD_REQUIRE(cfg.sample_rate == sample.spec.sample_rate, "audio config rate differs from sample rate");
    STREAMHEAD_REQUIRE(cfg.feature_rate == sample.spec.fps, "feature rate must equal video fps (1:1 alignment)");
    STREAMHEAD_REQUIRE(chunk_frames >= 1 && motion_frames >= 1 && motion_frames <= chunk_frames,
                       "motion_frames must lie in [1, chunk_frames]");
    const std::size_t frames = sample.latents.dim(0);
    STREAMHEAD_REQUIRE(frames >= chunk_frames, "sample shorter than one chunk");

    const std::size_t per_frame = sample.spec.samples_per_frame();
    const std::size_t channels = sample.latents.dim(1);
    std::vector<DatasetChunk> out;
    for (std::size_t j = 0; (j + 1) * chunk_frames <= frames; ++j) {
        DatasetChunk c;
        const std::size_t begin = j * chunk_frames;
        c.audio_end = (begin + chunk_frames) * per_frame;
        c.train.target = {sample.latents.rows(begin, begin + chunk_frames)};
        c.train.reference = sample.ref;
        c.train.audio = audio::condition_from_history(std::span(sample.audio).first(c.audio_end), cfg, chunk_frames);
        if (j == 0) {
            Array rep(Shape{motion_frames, channels});
            for (std::size_t r = 0; r < motion_frames; ++r) {
                for (std::size_t ch = 0; ch < channels; ++ch) rep.at(r, ch) = sample.ref.channels[ch];
            }
            c.train.motion_source = std::move(rep);
            c.gt_motion = generator::MotionContext::single(sample.ref.channels);
        } else {
            c.train.motion_source = sample.latents.rows(begin - motion_frames, begin);
            c.gt_motion = {c.train.motion_source};
        }
        out.push_back(std::move(c));
    }
    return out;
}

audio::AudioQueue queue_snapshot(const SynthSample & sample, const DatasetChunk & chunk,
                                 const audio::AudioConfig & cfg) {
    return audio::build_queue(std::span(sample.audio).first(chunk.audio_end), cfg);
}

std::vector<generator::TrainingChunk> training_pool(std::uint64_t seed, std::size_t count, double duration_s,
                                                    const audio::AudioConfig & cfg, std::size_t chunk_frames,
                                                    std::size_t motion_frames) {
    std::vector<generator::TrainingChunk> pool;
    for (std::size_t i = 0; i < count; ++i) {
        SynthSpec spec = SynthSpec::random(seed * 1000003ULL + i, duration_s);
        spec.sample_rate = cfg.sample_rate;
        spec.fps = cfg.feature_rate;
        for (auto & c : chunk_dataset(generate_sample(spec), cfg, chunk_frames, motion_frames)) {
            pool.push_back(std::move(c.train));
        }
    }
    return pool;
}

} // namespace streamhead::synth
