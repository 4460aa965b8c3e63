#pragma once

// Oracle-guided few-step distillation: distribution-matching generator gradient, stochastic
// truncation rollouts, latent regression, and the fake-score tracking loop.

#include "streamhead/generator/flow.hpp"
#include "streamhead/synth/data_synth.hpp"

#include <functional>
#include <optional>

namespace streamhead::distill {

using generator::Conditions;
using generator::LatentChunk;
using generator::MotionContext;
using generator::VelocityModel;
using generator::VelocityNetwork;

// Which motion history the frozen teacher sees. Oracle = ground truth; Predicted is the control.
enum class TeacherMotion { Oracle, Predicted };

struct DistillConfig {
    std::size_t K = 5;
    std::size_t student_steps = 4;
    double lambda_reg = 1.0;
    std::size_t update_ratio = 5;
    double generator_lr = 1e-3;
    double fake_lr = 2e-4; // generator_lr : fake_lr = 5 : 1
    double t_min = 0.02;
    double t_max = 0.98;
    TeacherMotion teacher_motion = TeacherMotion::Oracle;
    std::size_t generator_steps = 900;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DistillationPlan {
    std::size_t K = 5;
    std::size_t k = 1;       // truncation length, uniform on 1..K
    std::size_t t_prime = 0; // retained sampler step of chunk k, uniform on 0..student_steps-1
    std::size_t student_steps = 4;
    double lambda_reg = 1.0;
    std::size_t update_ratio = 5;
};

DistillationPlan sample_plan(const DistillConfig & cfg, numerics::Rng & rng);

// Ground-truth session used for rollouts: at least K aligned chunks.
struct Episode {
    generator::ReferenceLatent reference;
    std::vector<LatentChunk> gt_chunks;
    std::vector<audio::ConditionWindow> audio;
    std::vector<MotionContext> gt_motion; // m_gt: [reference] for chunk 0, else tail of gt chunk j-1

    std::size_t size() const { return gt_chunks.size(); }
};

Episode make_episode(const synth::SynthSample & sample, const audio::AudioConfig & cfg, std::size_t chunk_frames,
                     std::size_t motion_frames);

struct ScoreNetworks {
    VelocityNetwork real; // frozen teacher
    VelocityNetwork fake; // tracks the student distribution
    std::size_t fake_updates = 0;
    std::size_t fake_updates_since_generator = 0;

    static ScoreNetworks from_teacher(const VelocityNetwork & teacher);
};

struct RolloutTrace {
    std::size_t k = 0;
    std::size_t t_prime = 0;
    std::size_t student_steps = 0;
    std::vector<LatentChunk> chunks;         // values of chunks 1..k
    std::vector<MotionContext> pred_motion;  // m_pred consumed by each chunk
    std::vector<MotionContext> gt_motion;    // m_gt aligned with each chunk
    std::vector<LatentChunk> gt_chunks;
    std::vector<numerics::Array> noises;     // sampler start noise of each chunk
    numerics::Var final_output;              // chunk k, differentiable only through step t_prime
    Conditions student_conditions;           // chunk k with m_pred
    Conditions oracle_conditions;            // chunk k with m_gt
    std::size_t retained_graph_nodes = 0;    // peak graph nodes alive during the rollout
};

// Generates chunks 1..k autoregressively, each conditioned on the tail of the previous generated
// chunk. Chunks 1..k-1 and every step of chunk k except t_prime are detached.
RolloutTrace rollout_student(const VelocityNetwork & student, const DistillationPlan & plan, const Episode & episode,
                             numerics::Rng & rng);

// Chunk k recomputed from constant copies of the trace's stored values (m_pred, noise),
// without re-running chunks 1..k-1.
numerics::Var replay_final_chunk(const VelocityNetwork & student, const RolloutTrace & trace);

// t * x + (1 - t) * noise
numerics::Array forward_diffuse(const numerics::Array & x, double t, const numerics::Array & noise);

// Surrogate whose gradient w.r.t. upstream parameters is -sum((score_real - score_fake) * dG/dtheta).
numerics::Var dmd_surrogate(const numerics::Var & generated, const numerics::Array & score_real,
                            const numerics::Array & score_fake);

// x_t + (1 - t) * v, evaluated without recording a graph.
numerics::Array denoised_estimate(const VelocityModel & model, const numerics::Array & x_t, const Conditions & cond,
                                  double t);

struct DmdTerm {
    numerics::Var surrogate;
    double t = 0.0;
    double dmd_norm = 0.0; // ||x_hat_real - x_hat_fake||_2
    const Conditions * teacher_conditions = nullptr;
    const Conditions * fake_conditions = nullptr;
};

DmdTerm dmd_term(const DistillationPlan & plan, const ScoreNetworks & nets, const RolloutTrace & trace,
                 TeacherMotion teacher_motion, double t_min, double t_max, numerics::Rng & rng);

// Gradient of the distribution-matching term w.r.t. the parameters feeding trace.final_output.
numerics::GradientMap dmd_generator_gradient(const DistillationPlan & plan, const ScoreNetworks & nets,
                                             const RolloutTrace & trace, numerics::Rng & rng,
                                             TeacherMotion teacher_motion = TeacherMotion::Oracle,
                                             double t_min = 0.02, double t_max = 0.98);

// ||student - gt||_2^2 over all elements.
numerics::Var regression_loss(const numerics::Var & student_chunk, const numerics::Array & gt_chunk);

struct StepDiagnostics {
    std::size_t step = 0;
    std::size_t k = 0;
    std::size_t t_prime = 0;
    double t = 0.0;
    double dmd_norm = 0.0;
    double reg_loss = 0.0;
    bool teacher_saw_gt = false;
    bool fake_saw_pred = false;
};

// One generator update with the distribution-matching gradient plus lambda * regression gradient.
// Requires exactly plan.update_ratio fake-score updates since the previous generator update.
StepDiagnostics total_loss_step(const DistillationPlan & plan, ScoreNetworks & nets, VelocityNetwork & student,
                                const Episode & episode, numerics::Rng & rng, const DistillConfig & cfg);

struct StudentSample {
    LatentChunk chunk;
    Conditions cond; // with the m_pred the chunk was generated from
};

// A fresh no-grad rollout of the current student over `chunks` chunks of the episode.
std::vector<StudentSample> draw_student_samples(const VelocityNetwork & student, const Episode & episode,
                                                std::size_t chunks, std::size_t steps, numerics::Rng & rng);

// One flow-matching step fitting the fake score to student samples. Returns the pre-step loss.
double update_fake_score(ScoreNetworks & nets, std::span<const StudentSample> samples, double lr, numerics::Rng & rng);

struct DistillResult {
    VelocityNetwork student;
    std::vector<StepDiagnostics> diagnostics;
};

// update_ratio fake-score updates then one generator update, repeated cfg.generator_steps times.
DistillResult distill(const VelocityNetwork & teacher, std::span<const Episode> episodes, const DistillConfig & cfg,
                      const std::function<void(const StepDiagnostics &)> & on_step = {});

} // namespace streamhead::distill
