#include "run_config.hpp"

#include "streamhead/errors.hpp"

#include <fstream>
#include <set>

namespace streamhead::cli {

using nlohmann::json;

namespace {

// Reads known keys out of one JSON object and rejects anything left over.
class Section {
public:
    Section(const json & j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw LoadError(path_ + ": expected an object");
    }
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto & [key, _] : j_.items()) {
            if (!seen_.count(key)) throw LoadError("unknown config key: " + path_ + "." + key);
        }
    }

    template <class T> void get(const char * key, T & out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception & e) {
            throw LoadError(path_ + "." + key + ": " + e.what());
        }
    }

    const json * child(const char * key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

private:
    const json & j_;
    std::string path_;
    std::set<std::string> seen_;
};

} // namespace

std::string motion_name(distill::TeacherMotion m) { return m == distill::TeacherMotion::Oracle ? "oracle" : "predicted"; }

distill::TeacherMotion parse_motion(const std::string & s) {
    if (s == "oracle") return distill::TeacherMotion::Oracle;
    if (s == "predicted") return distill::TeacherMotion::Predicted;
    throw LoadError("teacher_motion must be \"oracle\" or \"predicted\", got \"" + s + "\"");
}

void RunConfig::apply_seed(std::uint64_t s) {
    seed = s;
    pretrain.seed = s;
    distill.seed = s;
}

void RunConfig::validate() const {
    model.validate();
    audio.validate();
    pretrain.motion.validate();
    distill.validate();
    STREAMHEAD_REQUIRE(model.audio_layers == audio.layers && model.feat_dim == audio.feat_dim,
                       "model and audio feature shapes differ");
    STREAMHEAD_REQUIRE(sampler_steps >= 1, "sampler_steps must be >= 1");
    STREAMHEAD_REQUIRE(pool_sessions >= 1, "pool_sessions must be >= 1");
}

RunConfig config_from_json(const json & j) {
    RunConfig c;
    {
        Section root(j, "config");
        int version = -1;
        root.get("schema_version", version);
        if (version != kSchemaVersion) {
            throw LoadError("config schema_version must be " + std::to_string(kSchemaVersion));
        }
        root.get("seed", c.seed);
        if (const json * m = root.child("model")) {
            Section s(*m, "model");
            s.get("channels", c.model.channels);
            s.get("chunk_frames", c.model.chunk_frames);
            s.get("motion_frames", c.model.motion_frames);
            s.get("audio_layers", c.model.audio_layers);
            s.get("feat_dim", c.model.feat_dim);
            s.get("t_embed_dim", c.model.t_embed_dim);
            s.get("hidden", c.model.hidden);
            s.get("blocks", c.model.blocks);
        }
        if (const json * a = root.child("audio")) {
            Section s(*a, "audio");
            s.get("sample_rate", c.audio.sample_rate);
            s.get("t_max_s", c.audio.t_max_s);
            s.get("feature_rate", c.audio.feature_rate);
            s.get("layers", c.audio.layers);
            s.get("feat_dim", c.audio.feat_dim);
        }
        if (const json * p = root.child("pretrain")) {
            Section s(*p, "pretrain");
            s.get("pool_sessions", c.pool_sessions);
            s.get("pool_duration_s", c.pool_duration_s);
            s.get("lr", c.pretrain.lr);
            s.get("lr_final", c.pretrain.lr_final);
            s.get("batch_chunks", c.pretrain.batch_chunks);
            s.get("steps", c.pretrain.steps);
            s.get("eval_chunks", c.pretrain.eval_chunks);
            s.get("p_full", c.pretrain.motion.p_full);
            s.get("p_single", c.pretrain.motion.p_single);
        }
        if (const json * d = root.child("distill")) {
            Section s(*d, "distill");
            s.get("K", c.distill.K);
            s.get("student_steps", c.distill.student_steps);
            s.get("lambda_reg", c.distill.lambda_reg);
            s.get("update_ratio", c.distill.update_ratio);
            s.get("generator_lr", c.distill.generator_lr);
            s.get("fake_lr", c.distill.fake_lr);
            s.get("t_min", c.distill.t_min);
            s.get("t_max", c.distill.t_max);
            s.get("generator_steps", c.distill.generator_steps);
            std::string motion = motion_name(c.distill.teacher_motion);
            s.get("teacher_motion", motion);
            c.distill.teacher_motion = parse_motion(motion);
        }
        if (const json * st = root.child("stream")) {
            Section s(*st, "stream");
            s.get("sampler_steps", c.sampler_steps);
            s.get("duration_s", c.stream_duration_s);
        }
        if (const json * ab = root.child("ablation")) {
            Section s(*ab, "ablation");
            s.get("seeds", c.ablation.seeds);
            s.get("episodes", c.ablation.episodes);
            s.get("episode_duration_s", c.ablation.episode_duration_s);
            s.get("eval_chunks", c.ablation.eval_chunks);
            s.get("eval_sessions", c.ablation.eval_sessions);
            s.get("min_surviving_seeds", c.ablation.min_surviving_seeds);
            s.get("lambda_sweep", c.ablation.lambda_sweep);
            s.get("lambda_reg", c.ablation.lambda_reg);
        }
    }
    c.pretrain.motion.n = c.model.motion_frames;
    c.apply_seed(c.seed);
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception & e) {
        throw LoadError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

json to_json(const RunConfig & c) {
    return {
        {"schema_version", kSchemaVersion},
        {"seed", c.seed},
        {"model",
         {{"channels", c.model.channels},
          {"chunk_frames", c.model.chunk_frames},
          {"motion_frames", c.model.motion_frames},
          {"audio_layers", c.model.audio_layers},
          {"feat_dim", c.model.feat_dim},
          {"t_embed_dim", c.model.t_embed_dim},
          {"hidden", c.model.hidden},
          {"blocks", c.model.blocks}}},
        {"audio",
         {{"sample_rate", c.audio.sample_rate},
          {"t_max_s", c.audio.t_max_s},
          {"feature_rate", c.audio.feature_rate},
          {"layers", c.audio.layers},
          {"feat_dim", c.audio.feat_dim}}},
        {"pretrain",
         {{"pool_sessions", c.pool_sessions},
          {"pool_duration_s", c.pool_duration_s},
          {"lr", c.pretrain.lr},
          {"lr_final", c.pretrain.lr_final},
          {"batch_chunks", c.pretrain.batch_chunks},
          {"steps", c.pretrain.steps},
          {"eval_chunks", c.pretrain.eval_chunks},
          {"p_full", c.pretrain.motion.p_full},
          {"p_single", c.pretrain.motion.p_single}}},
        {"distill",
         {{"K", c.distill.K},
          {"student_steps", c.distill.student_steps},
          {"lambda_reg", c.distill.lambda_reg},
          {"update_ratio", c.distill.update_ratio},
          {"generator_lr", c.distill.generator_lr},
          {"fake_lr", c.distill.fake_lr},
          {"t_min", c.distill.t_min},
          {"t_max", c.distill.t_max},
          {"generator_steps", c.distill.generator_steps},
          {"teacher_motion", motion_name(c.distill.teacher_motion)}}},
        {"stream", {{"sampler_steps", c.sampler_steps}, {"duration_s", c.stream_duration_s}}},
        {"ablation",
         {{"seeds", c.ablation.seeds},
          {"episodes", c.ablation.episodes},
          {"episode_duration_s", c.ablation.episode_duration_s},
          {"eval_chunks", c.ablation.eval_chunks},
          {"eval_sessions", c.ablation.eval_sessions},
          {"min_surviving_seeds", c.ablation.min_surviving_seeds},
          {"lambda_sweep", c.ablation.lambda_sweep},
          {"lambda_reg", c.ablation.lambda_reg}}},
    };
}

} // namespace streamhead::cli
