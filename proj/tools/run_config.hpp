#pragma once

// Versioned JSON run configuration. Every section and key is optional; unknown keys are errors.

#include "streamhead/eval/metrics.hpp"

#include <json.hpp>

#include <filesystem>

namespace streamhead::cli {

inline constexpr int kSchemaVersion = 1;

struct RunConfig {
    std::uint64_t seed = 0;
    generator::ModelConfig model;
    audio::AudioConfig audio;
    std::size_t pool_sessions = 32; // stage-1 training sessions
    double pool_duration_s = 10.0;
    generator::PretrainConfig pretrain;
    distill::DistillConfig distill;
    std::size_t sampler_steps = 4;
    double stream_duration_s = 60.0;
    eval::AblationConfig ablation;

    // Copies `seed` into the per-stage seeds.
    void apply_seed(std::uint64_t s);
    void validate() const;
};

RunConfig load_config(const std::filesystem::path & path);
RunConfig config_from_json(const nlohmann::json & j);
nlohmann::json to_json(const RunConfig & cfg);

std::string motion_name(distill::TeacherMotion m);
distill::TeacherMotion parse_motion(const std::string & s);

} // namespace streamhead::cli
