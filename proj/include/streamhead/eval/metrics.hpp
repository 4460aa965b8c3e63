#pragma once

// Identity-drift and lip-sync proxies over emitted packets, and the oracle-vs-control ablation.

#include "streamhead/distill/distillation.hpp"
#include "streamhead/streaming/session.hpp"

#include <optional>
#include <string>

namespace streamhead::eval {

struct DriftSeries {
    std::vector<double> per_chunk_identity_error;

    double mean() const;
};

// Per packet: || mean over frames of the identity channels - reference identity ||_2.
DriftSeries identity_drift(std::span<const streaming::StreamPacket> packets, const generator::ReferenceLatent & ref);

// Throws UndefinedCorrelation for fewer than 3 points or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct SyncReport {
    double pearson_r = 0.0;
    std::size_t frames = 0;
};

// Pearson r between the smoothed audio RMS envelope and the packets' concatenated channel 0.
SyncReport sync_score(std::span<const float> audio, std::span<const streaming::StreamPacket> packets,
                      const synth::SynthSpec & spec);

struct StreamedRun {
    audio::AudioSamples audio;
    std::vector<streaming::StreamPacket> packets;
    generator::ReferenceLatent ref;
    synth::SynthSpec spec;
};

// Live session over a fresh synthetic speaker: audio is pushed one chunk at a time and every chunk
// is generated from the session's own history. Packets pass through the f32 wire format.
StreamedRun stream_synthetic(const generator::VelocityNetwork & model, std::uint64_t seed, std::size_t chunks,
                             std::size_t sampler_steps, const audio::AudioConfig & acfg = {});

struct AblationConfig {
    distill::DistillConfig distill;        // teacher_motion and lambda_reg are overridden per variant
    // Regression weight for both variants. At 0 the variants differ only in the guidance term, which is
    // the one place the teacher's motion input enters; with the regression term on, it dominates and
    // both variants land on the same drift.
    double lambda_reg = 0.0;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::size_t episodes = 16;             // synthetic sessions per seed used for distillation
    double episode_duration_s = 10.0;
    std::size_t eval_chunks = 50;
    std::size_t eval_sessions = 2;         // drift averaged over this many held-out sessions
    std::size_t min_surviving_seeds = 3;
    bool lambda_sweep = true;              // lambda 0 vs 1 on the oracle variant, first surviving seed
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    std::optional<double> oracle_drift;  // empty if that run diverged
    std::optional<double> control_drift;
    std::string note;
};

struct LambdaCurve {
    double lambda = 0.0;
    std::vector<distill::StepDiagnostics> diagnostics;
    std::vector<double> drift_per_chunk;
};

struct AblationReport {
    std::vector<SeedOutcome> seeds;
    double median_oracle = 0.0;
    double median_control = 0.0;
    std::size_t surviving = 0;
    std::vector<LambdaCurve> lambda_curves;

    bool oracle_better() const { return median_oracle < median_control; }
    double effect() const { return median_control - median_oracle; }
};

// The one field in which the two variants' configs differ.
std::vector<std::string> config_difference(const distill::DistillConfig & a, const distill::DistillConfig & b);

std::vector<distill::Episode> distillation_episodes(std::uint64_t seed, std::size_t count, double duration_s,
                                                    const generator::ModelConfig & mc,
                                                    const audio::AudioConfig & acfg = {});

// Mean drift over `sessions` held-out synthetic sessions derived from seed.
double evaluate_drift(const generator::VelocityNetwork & student, std::uint64_t seed, std::size_t sessions,
                      std::size_t chunks, std::size_t sampler_steps, std::vector<double> * per_chunk = nullptr);

AblationReport ablate(const generator::VelocityNetwork & teacher, const AblationConfig & cfg,
                      const std::function<void(const std::string &)> & log = {});

double median(std::vector<double> v);

} // namespace streamhead::eval
