#include "streamhead/distill/distillation.hpp"

#include "streamhead/errors.hpp"

#include <cmath>

namespace streamhead::distill {

using numerics::Array;
using numerics::Shape;
using numerics::Var;

void DistillConfig::validate() const {
    STREAMHEAD_REQUIRE(K >= 1, "K must be at least 1");
    STREAMHEAD_REQUIRE(student_steps >= 1, "student_steps must be at least 1");
    STREAMHEAD_REQUIRE(update_ratio >= 1, "update_ratio must be at least 1");
    STREAMHEAD_REQUIRE(lambda_reg >= 0.0, "lambda_reg must be non-negative");
    STREAMHEAD_REQUIRE(generator_lr > 0.0 && fake_lr > 0.0, "learning rates must be positive");
    STREAMHEAD_REQUIRE(t_min > 0.0 && t_min < t_max && t_max < 1.0, "need 0 < t_min < t_max < 1");
}

DistillationPlan sample_plan(const DistillConfig & cfg, numerics::Rng & rng) {
    cfg.validate();
    DistillationPlan plan;
    plan.K = cfg.K;
    plan.student_steps = cfg.student_steps;
    plan.lambda_reg = cfg.lambda_reg;
    plan.update_ratio = cfg.update_ratio;
    plan.k = rng.uniform_index(1, cfg.K);
    plan.t_prime = rng.uniform_index(0, cfg.student_steps - 1);
    return plan;
}

Episode make_episode(const synth::SynthSample & sample, const audio::AudioConfig & cfg, std::size_t chunk_frames,
                     std::size_t motion_frames) {
    Episode ep;
    ep.reference = sample.ref;
    for (auto & c : synth::chunk_dataset(sample, cfg, chunk_frames, motion_frames)) {
        ep.gt_chunks.push_back(std::move(c.train.target));
        ep.audio.push_back(std::move(c.train.audio));
        ep.gt_motion.push_back(std::move(c.gt_motion));
    }
    return ep;
}

ScoreNetworks ScoreNetworks::from_teacher(const VelocityNetwork & teacher) {
    return {teacher.clone(), teacher.clone(), 0, 0};
}

RolloutTrace rollout_student(const VelocityNetwork & student, const DistillationPlan & plan, const Episode & episode,
                             numerics::Rng & rng) {
    STREAMHEAD_REQUIRE(plan.k >= 1 && plan.k <= plan.K, "k outside 1..K");
    STREAMHEAD_REQUIRE(plan.t_prime < plan.student_steps, "t_prime outside the sampler grid");
    STREAMHEAD_REQUIRE(episode.size() >= plan.k, "episode shorter than the rollout");
    const std::size_t n_ctx = student.config().motion_frames;
    const std::size_t base_nodes = numerics::GraphStats::live();
    numerics::GraphStats::reset_peak();

    RolloutTrace trace;
    trace.k = plan.k;
    trace.t_prime = plan.t_prime;
    trace.student_steps = plan.student_steps;
    MotionContext motion = MotionContext::single(episode.reference.channels);
    for (std::size_t j = 0; j < plan.k; ++j) {
        const Conditions cond{episode.reference, motion, episode.audio[j]};
        Array noise = rng.normal_array(episode.gt_chunks[j].frames.shape());
        trace.pred_motion.push_back(motion);
        trace.gt_motion.push_back(episode.gt_motion[j]);
        trace.gt_chunks.push_back(episode.gt_chunks[j]);
        if (j + 1 < plan.k) {
            LatentChunk chunk = generator::generate_chunk(student, cond, noise, plan.student_steps);
            motion = MotionContext::tail(chunk, n_ctx);
            trace.chunks.push_back(std::move(chunk));
        } else {
            trace.final_output = generator::sample_chunk(student, cond, noise, plan.student_steps, plan.t_prime);
            trace.chunks.push_back({trace.final_output.value()});
            trace.student_conditions = cond;
            trace.oracle_conditions = {episode.reference, episode.gt_motion[j], episode.audio[j]};
        }
        trace.noises.push_back(std::move(noise));
    }
    trace.retained_graph_nodes = numerics::GraphStats::peak() - base_nodes;
    return trace;
}

Var replay_final_chunk(const VelocityNetwork & student, const RolloutTrace & trace) {
    STREAMHEAD_REQUIRE(!trace.noises.empty(), "empty trace");
    const Conditions cond{
        generator::ReferenceLatent{Array(trace.student_conditions.reference.channels)},
        MotionContext{Array(trace.pred_motion.back().frames)},
        trace.student_conditions.audio,
    };
    return generator::sample_chunk(student, cond, trace.noises.back(), trace.student_steps, trace.t_prime);
}

Array forward_diffuse(const Array & x, double t, const Array & noise) {
    return generator::interpolate(noise, x, t);
}

Var dmd_surrogate(const Var & generated, const Array & score_real, const Array & score_fake) {
    STREAMHEAD_REQUIRE(score_real.shape() == generated.shape() && score_fake.shape() == generated.shape(),
                       "score shapes must match the generated sample");
    Array diff(score_real.shape());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = score_real[i] - score_fake[i];
    return numerics::neg(numerics::sum(Var::constant(std::move(diff)) * generated));
}

Array denoised_estimate(const VelocityModel & model, const Array & x_t, const Conditions & cond, double t) {
    numerics::NoGradGuard guard;
    const Array v = model.velocity(Var::constant(x_t), cond, t).value();
    Array out(x_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x_t[i] + (1.0 - t) * v[i];
    return out;
}

DmdTerm dmd_term(const DistillationPlan & plan, const ScoreNetworks & nets, const RolloutTrace & trace,
                 TeacherMotion teacher_motion, double t_min, double t_max, numerics::Rng & rng) {
    STREAMHEAD_REQUIRE(trace.k == plan.k && trace.t_prime == plan.t_prime, "trace does not belong to this plan");
    STREAMHEAD_REQUIRE(trace.final_output.requires_grad(), "trace output carries no gradient path");
    DmdTerm term;
    term.t = rng.uniform(t_min, t_max);
    const Array & g = trace.final_output.value();
    const Array x_t = forward_diffuse(g, term.t, rng.normal_array(g.shape()));
    term.teacher_conditions =
        teacher_motion == TeacherMotion::Oracle ? &trace.oracle_conditions : &trace.student_conditions;
    term.fake_conditions = &trace.student_conditions;
    const Array real = denoised_estimate(nets.real, x_t, *term.teacher_conditions, term.t);
    const Array fake = denoised_estimate(nets.fake, x_t, *term.fake_conditions, term.t);
    double sq = 0.0;
    for (std::size_t i = 0; i < real.size(); ++i) sq += (real[i] - fake[i]) * (real[i] - fake[i]);
    term.dmd_norm = std::sqrt(sq);
    term.surrogate = dmd_surrogate(trace.final_output, real, fake);
    return term;
}

numerics::GradientMap dmd_generator_gradient(const DistillationPlan & plan, const ScoreNetworks & nets,
                                             const RolloutTrace & trace, numerics::Rng & rng,
                                             TeacherMotion teacher_motion, double t_min, double t_max) {
    return numerics::backward(dmd_term(plan, nets, trace, teacher_motion, t_min, t_max, rng).surrogate);
}

Var regression_loss(const Var & student_chunk, const Array & gt_chunk) {
    STREAMHEAD_REQUIRE(student_chunk.shape() == gt_chunk.shape(), "regression target shape mismatch");
    return numerics::sum_squares(student_chunk - Var::constant(gt_chunk));
}

StepDiagnostics total_loss_step(const DistillationPlan & plan, ScoreNetworks & nets, VelocityNetwork & student,
                                const Episode & episode, numerics::Rng & rng, const DistillConfig & cfg) {
    STREAMHEAD_REQUIRE(nets.fake_updates_since_generator == plan.update_ratio,
                       "expected " + std::to_string(plan.update_ratio) + " fake-score updates before a generator update, got " +
                           std::to_string(nets.fake_updates_since_generator));
    const RolloutTrace trace = rollout_student(student, plan, episode, rng);
    const DmdTerm dmd = dmd_term(plan, nets, trace, cfg.teacher_motion, cfg.t_min, cfg.t_max, rng);
    const Var reg = regression_loss(trace.final_output, trace.gt_chunks.back().frames);
    const Var total = dmd.surrogate + numerics::scale(reg, plan.lambda_reg);
    if (!std::isfinite(total.value().item())) throw TrainingDivergence("non-finite distillation loss; step rejected");
    generator::sgd_step(student.parameters(), numerics::backward(total), cfg.generator_lr);
    nets.fake_updates_since_generator = 0;

    StepDiagnostics d;
    d.k = plan.k;
    d.t_prime = plan.t_prime;
    d.t = dmd.t;
    d.dmd_norm = dmd.dmd_norm;
    d.reg_loss = reg.value().item();
    d.teacher_saw_gt = dmd.teacher_conditions == &trace.oracle_conditions;
    d.fake_saw_pred = dmd.fake_conditions == &trace.student_conditions;
    return d;
}

std::vector<StudentSample> draw_student_samples(const VelocityNetwork & student, const Episode & episode,
                                                std::size_t chunks, std::size_t steps, numerics::Rng & rng) {
    STREAMHEAD_REQUIRE(chunks >= 1 && chunks <= episode.size(), "chunk count outside the episode");
    std::vector<StudentSample> out;
    MotionContext motion = MotionContext::single(episode.reference.channels);
    for (std::size_t j = 0; j < chunks; ++j) {
        Conditions cond{episode.reference, motion, episode.audio[j]};
        LatentChunk chunk = generator::generate_chunk(student, cond, steps, rng);
        motion = MotionContext::tail(chunk, student.config().motion_frames);
        out.push_back({std::move(chunk), std::move(cond)});
    }
    return out;
}

double update_fake_score(ScoreNetworks & nets, std::span<const StudentSample> samples, double lr, numerics::Rng & rng) {
    STREAMHEAD_REQUIRE(!samples.empty(), "no student samples");
    std::vector<generator::FlowExample> batch;
    batch.reserve(samples.size());
    for (const auto & s : samples) {
        generator::FlowExample ex;
        ex.x1 = s.chunk.frames;
        ex.x0 = rng.normal_array(ex.x1.shape());
        ex.t = rng.uniform();
        ex.cond = s.cond;
        batch.push_back(std::move(ex));
    }
    // squared norm per chunk, averaged over the batch: the same per-element scale as the generator terms
    const double elements = static_cast<double>(samples.front().chunk.frames.size());
    const Var loss = numerics::scale(generator::flow_matching_loss(nets.fake, batch), elements);
    const double value = loss.value().item();
    if (!std::isfinite(value)) throw TrainingDivergence("non-finite fake-score loss; step rejected");
    generator::sgd_step(nets.fake.parameters(), numerics::backward(loss), lr);
    ++nets.fake_updates;
    ++nets.fake_updates_since_generator;
    return value;
}

DistillResult distill(const VelocityNetwork & teacher, std::span<const Episode> episodes, const DistillConfig & cfg,
                      const std::function<void(const StepDiagnostics &)> & on_step) {
    cfg.validate();
    STREAMHEAD_REQUIRE(!episodes.empty(), "no episodes");
    for (const auto & ep : episodes) STREAMHEAD_REQUIRE(ep.size() >= cfg.K, "episode shorter than K chunks");

    ScoreNetworks nets = ScoreNetworks::from_teacher(teacher);
    DistillResult result{teacher.clone(), {}};
    numerics::Rng rng(cfg.seed);
    auto pick = [&]() -> const Episode & { return episodes[rng.uniform_index(0, episodes.size() - 1)]; };
    for (std::size_t step = 0; step < cfg.generator_steps; ++step) {
        // the student is unchanged until the generator step, so one rollout serves all fake updates
        const auto samples = draw_student_samples(result.student, pick(), cfg.K, cfg.student_steps, rng);
        for (std::size_t r = 0; r < cfg.update_ratio; ++r) update_fake_score(nets, samples, cfg.fake_lr, rng);
        const DistillationPlan plan = sample_plan(cfg, rng);
        StepDiagnostics d = total_loss_step(plan, nets, result.student, pick(), rng, cfg);
        d.step = step;
        if (on_step) on_step(d);
        result.diagnostics.push_back(d);
    }
    return result;
}

} // namespace streamhead::distill
