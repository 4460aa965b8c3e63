#include "streamhead/eval/metrics.hpp"

#include "streamhead/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace streamhead::eval {

using numerics::Array;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix(splitmix(seed ^ (stream << 32)) + index);
}

constexpr std::uint64_t kEpisodeStream = 1;
constexpr std::uint64_t kEvalStream = 2;

} // namespace

double DriftSeries::mean() const {
    STREAMHEAD_REQUIRE(!per_chunk_identity_error.empty(), "empty drift series");
    return std::accumulate(per_chunk_identity_error.begin(), per_chunk_identity_error.end(), 0.0) /
           static_cast<double>(per_chunk_identity_error.size());
}

DriftSeries identity_drift(std::span<const streaming::StreamPacket> packets, const generator::ReferenceLatent & ref) {
    STREAMHEAD_REQUIRE(!packets.empty(), "need at least one packet");
    DriftSeries out;
    for (const auto & p : packets) {
        STREAMHEAD_REQUIRE(p.payload.rank() == 2 && p.payload.dim(1) == ref.channels.size() && p.payload.dim(0) >= 1,
                           "packet channel count differs from the reference");
        double sq = 0.0;
        for (std::size_t c = generator::kIdentityBegin; c < generator::kIdentityEnd; ++c) {
            double m = 0.0;
            for (std::size_t r = 0; r < p.payload.dim(0); ++r) m += p.payload.at(r, c);
            m /= static_cast<double>(p.payload.dim(0));
            sq += (m - ref.channels[c]) * (m - ref.channels[c]);
        }
        out.per_chunk_identity_error.push_back(std::sqrt(sq));
    }
    return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    STREAMHEAD_REQUIRE(x.size() == y.size(), "series lengths differ");
    if (x.size() < 3) throw UndefinedCorrelation("correlation needs at least 3 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw UndefinedCorrelation("zero variance series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

SyncReport sync_score(std::span<const float> audio, std::span<const streaming::StreamPacket> packets,
                      const synth::SynthSpec & spec) {
    std::vector<double> mouth;
    for (const auto & p : packets) {
        STREAMHEAD_REQUIRE(p.payload.rank() == 2 && p.payload.dim(1) > generator::kMouthChannel, "malformed packet");
        for (std::size_t r = 0; r < p.payload.dim(0); ++r) mouth.push_back(p.payload.at(r, generator::kMouthChannel));
    }
    const std::vector<double> env = synth::mouth_envelope(audio, spec);
    STREAMHEAD_REQUIRE(env.size() >= mouth.size(), "audio does not cover the packets' time span");
    SyncReport report;
    report.frames = mouth.size();
    report.pearson_r = pearson(std::span(env).first(mouth.size()), mouth);
    return report;
}

StreamedRun stream_synthetic(const generator::VelocityNetwork & model, std::uint64_t seed, std::size_t chunks,
                             std::size_t sampler_steps, const audio::AudioConfig & acfg) {
    const auto & mc = model.config();
    StreamedRun run;
    const double duration = static_cast<double>(chunks * mc.chunk_frames) / static_cast<double>(acfg.feature_rate);
    run.spec = synth::SynthSpec::random(seed, duration);
    run.spec.sample_rate = acfg.sample_rate;
    run.spec.fps = acfg.feature_rate;
    run.spec.channels = mc.channels;
    const synth::SynthSample sample = synth::generate_sample(run.spec);
    run.audio = sample.audio;
    run.ref = sample.ref;

    // non-owning: the session does not outlive this call
    std::shared_ptr<const generator::VelocityNetwork> handle(&model, [](const generator::VelocityNetwork *) {});
    streaming::Session session(run.ref, handle, {acfg, sampler_steps, seed});
    const std::size_t step = session.chunk_samples();
    for (std::size_t j = 0; j < chunks; ++j) {
        session.push_audio(std::span(run.audio).subspan(j * step, step));
        auto p = session.generate_next_chunk();
        if (!p) throw TrainingDivergence("non-finite chunk during evaluation");
        const auto wire = streaming::encode_packet(*p);
        run.packets.push_back(streaming::decode_packet_body(std::span(wire).subspan(4)));
    }
    return run;
}

std::vector<std::string> config_difference(const distill::DistillConfig & a, const distill::DistillConfig & b) {
    std::vector<std::string> diff;
    auto check = [&](bool same, const char * name) {
        if (!same) diff.emplace_back(name);
    };
    check(a.K == b.K, "K");
    check(a.student_steps == b.student_steps, "student_steps");
    check(a.lambda_reg == b.lambda_reg, "lambda_reg");
    check(a.update_ratio == b.update_ratio, "update_ratio");
    check(a.generator_lr == b.generator_lr, "generator_lr");
    check(a.fake_lr == b.fake_lr, "fake_lr");
    check(a.t_min == b.t_min, "t_min");
    check(a.t_max == b.t_max, "t_max");
    check(a.teacher_motion == b.teacher_motion, "teacher_motion");
    check(a.generator_steps == b.generator_steps, "generator_steps");
    check(a.seed == b.seed, "seed");
    return diff;
}

std::vector<distill::Episode> distillation_episodes(std::uint64_t seed, std::size_t count, double duration_s,
                                                    const generator::ModelConfig & mc, const audio::AudioConfig & acfg) {
    std::vector<distill::Episode> out;
    for (std::size_t i = 0; i < count; ++i) {
        synth::SynthSpec spec = synth::SynthSpec::random(derive(seed, kEpisodeStream, i), duration_s);
        spec.sample_rate = acfg.sample_rate;
        spec.fps = acfg.feature_rate;
        spec.channels = mc.channels;
        out.push_back(distill::make_episode(synth::generate_sample(spec), acfg, mc.chunk_frames, mc.motion_frames));
    }
    return out;
}

double evaluate_drift(const generator::VelocityNetwork & student, std::uint64_t seed, std::size_t sessions,
                      std::size_t chunks, std::size_t sampler_steps, std::vector<double> * per_chunk) {
    STREAMHEAD_REQUIRE(sessions >= 1 && chunks >= 1, "need at least one session and chunk");
    double total = 0.0;
    if (per_chunk) per_chunk->assign(chunks, 0.0);
    for (std::size_t s = 0; s < sessions; ++s) {
        const auto run = stream_synthetic(student, derive(seed, kEvalStream, s), chunks, sampler_steps);
        const DriftSeries d = identity_drift(run.packets, run.ref);
        total += d.mean();
        if (per_chunk) {
            for (std::size_t j = 0; j < chunks; ++j) {
                (*per_chunk)[j] += d.per_chunk_identity_error[j] / static_cast<double>(sessions);
            }
        }
    }
    return total / static_cast<double>(sessions);
}

double median(std::vector<double> v) {
    STREAMHEAD_REQUIRE(!v.empty(), "median of nothing");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

AblationReport ablate(const generator::VelocityNetwork & teacher, const AblationConfig & cfg,
                      const std::function<void(const std::string &)> & log) {
    STREAMHEAD_REQUIRE(cfg.seeds.size() >= 5, "the ablation needs at least 5 seeds");
    auto say = [&](const std::string & s) {
        if (log) log(s);
    };
    const auto & mc = teacher.config();
    AblationReport report;
    std::vector<double> oracle, control;
    for (const std::uint64_t seed : cfg.seeds) {
        const auto episodes = distillation_episodes(seed, cfg.episodes, cfg.episode_duration_s, mc);
        distill::DistillConfig oc = cfg.distill;
        oc.seed = seed;
        oc.lambda_reg = cfg.lambda_reg;
        oc.teacher_motion = distill::TeacherMotion::Oracle;
        distill::DistillConfig cc = oc;
        cc.teacher_motion = distill::TeacherMotion::Predicted;

        SeedOutcome outcome;
        outcome.seed = seed;
        auto run = [&](const distill::DistillConfig & dc, const char * name) -> std::optional<double> {
            try {
                const auto result = distill::distill(teacher, episodes, dc);
                const double d = evaluate_drift(result.student, seed, cfg.eval_sessions, cfg.eval_chunks, dc.student_steps);
                say("seed " + std::to_string(seed) + " " + name + " drift " + std::to_string(d));
                return d;
            } catch (const TrainingDivergence & e) {
                outcome.note += std::string(name) + " diverged: " + e.what() + "; ";
                say("seed " + std::to_string(seed) + " " + name + " diverged");
                return std::nullopt;
            }
        };
        outcome.oracle_drift = run(oc, "oracle");
        outcome.control_drift = run(cc, "control");
        if (outcome.oracle_drift && outcome.control_drift) {
            oracle.push_back(*outcome.oracle_drift);
            control.push_back(*outcome.control_drift);
        }
        report.seeds.push_back(std::move(outcome));
    }
    report.surviving = oracle.size();
    if (report.surviving < cfg.min_surviving_seeds) {
        throw TrainingDivergence("only " + std::to_string(report.surviving) + " seeds survived; need " +
                                 std::to_string(cfg.min_surviving_seeds));
    }
    report.median_oracle = median(oracle);
    report.median_control = median(control);

    if (cfg.lambda_sweep) {
        std::uint64_t seed = 0;
        for (const auto & s : report.seeds) {
            if (s.oracle_drift && s.control_drift) {
                seed = s.seed;
                break;
            }
        }
        const auto episodes = distillation_episodes(seed, cfg.episodes, cfg.episode_duration_s, mc);
        for (double lambda : {0.0, 1.0}) {
            distill::DistillConfig dc = cfg.distill;
            dc.seed = seed;
            dc.teacher_motion = distill::TeacherMotion::Oracle;
            dc.lambda_reg = lambda;
            LambdaCurve curve;
            curve.lambda = lambda;
            try {
                auto result = distill::distill(teacher, episodes, dc);
                curve.diagnostics = std::move(result.diagnostics);
                evaluate_drift(result.student, seed, cfg.eval_sessions, cfg.eval_chunks, dc.student_steps,
                               &curve.drift_per_chunk);
            } catch (const TrainingDivergence & e) {
                say(std::string("lambda sweep diverged: ") + e.what());
            }
            report.lambda_curves.push_back(std::move(curve));
        }
    }
    return report;
}

} // namespace streamhead::eval
