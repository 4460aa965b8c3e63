// streamhead: dataset synthesis, two-stage training, live streaming, benchmarks and evaluation.

#include "run_config.hpp"

#include "streamhead/errors.hpp"
#include "streamhead/streaming/session.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace streamhead;
using cli::RunConfig;
using Clock = std::chrono::steady_clock;

namespace {

const char * kMetricNote =
    "identity drift and audio-envelope sync (Pearson r) are desk-scale proxies standing in for image-quality and "
    "lip-sync scores that need pretrained perception networks";

struct Globals {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
};

RunConfig resolve(const Globals & g) {
    RunConfig cfg = g.config.empty() ? cli::config_from_json({{"schema_version", cli::kSchemaVersion}})
                                     : cli::load_config(g.config);
    if (g.seed_set) cfg.apply_seed(g.seed);
    return cfg;
}

void write_json(const fs::path & path, const json & j) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json read_json(const fs::path & path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot read " + path.string());
    return json::parse(in);
}

// Creates the run directory and records how it was produced.
fs::path open_run(const Globals & g, const RunConfig & cfg, const std::string & cmd, int argc, char ** argv) {
    const fs::path dir = g.out.empty() ? fs::path("runs") / (cmd + "-seed" + std::to_string(cfg.seed)) : fs::path(g.out);
    fs::create_directories(dir);
    write_json(dir / "config.json", cli::to_json(cfg));
    std::ofstream cl(dir / "command.txt");
    for (int i = 0; i < argc; ++i) cl << (i ? " " : "") << argv[i];
    cl << "\n";
    return dir;
}

std::string identity_str(const generator::ReferenceLatent & ref) {
    std::string s;
    for (std::size_t i = 0; i < ref.channels.size(); ++i) s += (i ? "," : "") + std::to_string(ref.channels[i]);
    return s;
}

json diagnostics_json(const distill::StepDiagnostics & d) {
    return {{"step", d.step},     {"k", d.k},         {"t_prime", d.t_prime},           {"t", d.t},
            {"dmd_norm", d.dmd_norm}, {"reg_loss", d.reg_loss}, {"teacher_saw_gt", d.teacher_saw_gt},
            {"fake_saw_pred", d.fake_saw_pred}};
}

generator::VelocityNetwork load_model(const std::string & path, const RunConfig & cfg) {
    return generator::VelocityNetwork::load(path, cfg.model);
}

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig & cfg, const fs::path & dir, std::size_t count, double duration) {
    const fs::path data = dir / "data";
    fs::create_directories(data);
    std::vector<std::pair<std::string, std::string>> manifest{{"sessions", std::to_string(count)},
                                                               {"duration_s", std::to_string(duration)}};
    for (std::size_t i = 0; i < count; ++i) {
        auto spec = synth::SynthSpec::random(cfg.seed * 1000003ULL + i, duration);
        spec.sample_rate = cfg.audio.sample_rate;
        spec.fps = cfg.audio.feature_rate;
        spec.channels = cfg.model.channels;
        const auto sample = synth::generate_sample(spec);
        const std::string stem = "session_" + std::to_string(i);
        audio::write_pcm(data / (stem + ".f32"), sample.audio, spec.sample_rate);
        {
            streaming::FileSink sink(data / (stem + ".latents"));
            const std::size_t n = cfg.model.chunk_frames;
            for (std::size_t b = 0, j = 0; b < sample.latents.dim(0); b += n, ++j) {
                const std::size_t e = std::min(b + n, sample.latents.dim(0));
                sink.write({static_cast<std::uint32_t>(j), static_cast<std::uint16_t>(e - b),
                            static_cast<std::uint16_t>(spec.channels), sample.latents.rows(b, e), 0});
            }
        }
        manifest.emplace_back(stem + ".spec_seed", std::to_string(spec.seed));
        manifest.emplace_back(stem + ".reference", identity_str(sample.ref));
        manifest.emplace_back(stem + ".f32.sha256", streaming::sha256_file(data / (stem + ".f32")));
        manifest.emplace_back(stem + ".latents.sha256", streaming::sha256_file(data / (stem + ".latents")));
    }
    streaming::write_manifest(dir / "manifest.txt", manifest);
    std::cout << "wrote " << count << " sessions to " << data << "\n";
    return 0;
}

int cmd_pretrain(const RunConfig & cfg, const fs::path & dir) {
    const auto pool = synth::training_pool(cfg.seed, cfg.pool_sessions, cfg.pool_duration_s, cfg.audio,
                                           cfg.model.chunk_frames, cfg.model.motion_frames);
    generator::VelocityNetwork net(cfg.model, cfg.seed);
    std::ofstream curve(dir / "loss_curve.csv");
    curve << "step,lr,loss\n";
    const auto t0 = Clock::now();
    const auto result = generator::pretrain(net, pool, cfg.pretrain, [&](std::size_t step, double loss) {
        curve << step << "," << generator::scheduled_lr(cfg.pretrain, step) << "," << loss << "\n";
        if ((step + 1) % 200 == 0) std::cerr << "step " << step + 1 << " loss " << loss << "\n";
    });
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    net.save(dir / "teacher.ck");

    const auto run = eval::stream_synthetic(net, cfg.seed + 1000, 50, cfg.sampler_steps, cfg.audio);
    const double r = eval::sync_score(run.audio, run.packets, run.spec).pearson_r;
    const double drift = eval::identity_drift(run.packets, run.ref).mean();
    const json metrics{{"note", kMetricNote},
                       {"eval_loss_initial", result.eval_loss_initial},
                       {"eval_loss_final", result.eval_loss_final},
                       {"loss_ratio", result.eval_loss_final / result.eval_loss_initial},
                       {"sync_r", r},
                       {"identity_drift", drift},
                       {"train_seconds", secs}};
    write_json(dir / "metrics.json", metrics);
    streaming::write_manifest(dir / "manifest.txt", {{"teacher.ck.sha256", streaming::sha256_file(dir / "teacher.ck")},
                                                     {"seed", std::to_string(cfg.seed)}});
    std::cout << metrics.dump(2) << "\n";
    return 0;
}

int cmd_distill(const RunConfig & cfg, const fs::path & dir, const std::string & teacher_path) {
    const auto teacher = load_model(teacher_path, cfg);
    const auto episodes = eval::distillation_episodes(cfg.seed, cfg.ablation.episodes, cfg.ablation.episode_duration_s,
                                                      cfg.model, cfg.audio);
    std::ofstream diag(dir / "diagnostics.ndjson");
    const auto result = distill::distill(teacher, episodes, cfg.distill, [&](const distill::StepDiagnostics & d) {
        diag << diagnostics_json(d).dump() << "\n";
        if ((d.step + 1) % 100 == 0) std::cerr << "generator step " << d.step + 1 << " dmd " << d.dmd_norm << "\n";
    });
    result.student.save(dir / "student.ck");
    std::vector<double> per_chunk;
    const double before = eval::evaluate_drift(teacher, cfg.seed, cfg.ablation.eval_sessions, cfg.ablation.eval_chunks,
                                               cfg.distill.student_steps);
    const double after = eval::evaluate_drift(result.student, cfg.seed, cfg.ablation.eval_sessions,
                                              cfg.ablation.eval_chunks, cfg.distill.student_steps, &per_chunk);
    const json metrics{{"note", kMetricNote},
                       {"teacher_motion", cli::motion_name(cfg.distill.teacher_motion)},
                       {"teacher_drift", before},
                       {"student_drift", after},
                       {"student_drift_per_chunk", per_chunk}};
    write_json(dir / "metrics.json", metrics);
    streaming::write_manifest(dir / "manifest.txt",
                              {{"teacher.ck", fs::absolute(teacher_path).string()},
                               {"teacher.ck.sha256", streaming::sha256_file(teacher_path)},
                               {"student.ck.sha256", streaming::sha256_file(dir / "student.ck")},
                               {"seed", std::to_string(cfg.seed)}});
    std::cout << "student drift " << after << " (teacher " << before << ")\n";
    return 0;
}

// Writes every packet to each of its sinks.
class TeeSink final : public streaming::PacketSink {
public:
    void add(streaming::PacketSink & s) { sinks_.push_back(&s); }
    void write(const streaming::StreamPacket & p) override {
        for (auto * s : sinks_) s->write(p);
    }
    void flush() override {
        for (auto * s : sinks_) s->flush();
    }

private:
    std::vector<streaming::PacketSink *> sinks_;
};

int listen_once(int port) {
    const int srv = socket(AF_INET, SOCK_STREAM, 0);
    if (srv < 0) throw std::runtime_error("socket() failed");
    const int one = 1;
    setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (bind(srv, reinterpret_cast<sockaddr *>(&addr), sizeof addr) != 0 || listen(srv, 1) != 0) {
        close(srv);
        throw std::runtime_error("cannot listen on port " + std::to_string(port));
    }
    std::cerr << "waiting for one client on 127.0.0.1:" << port << "\n";
    const int fd = accept(srv, nullptr, nullptr);
    close(srv);
    if (fd < 0) throw std::runtime_error("accept() failed");
    return fd;
}

struct StreamArgs {
    std::string checkpoint;
    std::string audio;  // pcm path, "-" for stdin
    int listen_port = 0; // raw f32 audio in, packets out over one TCP connection
    std::string identity;
    bool flat_out = false;
    bool csv = false;
};

generator::ReferenceLatent parse_identity(const std::string & s, std::size_t channels) {
    std::array<double, 4> id{};
    std::stringstream in(s);
    std::string tok;
    std::size_t i = 0;
    while (std::getline(in, tok, ',')) {
        if (i >= 4) throw LoadError("--identity takes 4 comma-separated values");
        id[i++] = std::stod(tok);
    }
    if (i != 4) throw LoadError("--identity takes 4 comma-separated values");
    return synth::reference_for(id, channels);
}

json drift_sync(const fs::path & dir, const json & meta) {
    const auto packets = streaming::read_packet_file(dir / "packets.bin");
    json out{{"note", kMetricNote}, {"chunks", packets.size()}};
    if (packets.empty()) return out;
    generator::ReferenceLatent ref;
    ref.channels = numerics::Array::vector(meta.at("reference").get<std::vector<double>>());
    const auto drift = eval::identity_drift(packets, ref);
    out["identity_drift"] = drift.mean();
    out["identity_drift_per_chunk"] = drift.per_chunk_identity_error;
    if (meta.contains("synthetic_spec_seed")) {
        auto spec = synth::SynthSpec::random(meta.at("synthetic_spec_seed").get<std::uint64_t>(),
                                             meta.at("synthetic_duration_s").get<double>());
        spec.sample_rate = meta.at("sample_rate").get<std::size_t>();
        spec.fps = meta.at("feature_rate").get<std::size_t>();
        spec.channels = ref.channels.size();
        const auto audio = audio::read_pcm(dir / "audio.f32");
        out["sync_r"] = eval::sync_score(audio.samples, packets, spec).pearson_r;
    }
    return out;
}

int cmd_stream(const RunConfig & cfg, const fs::path & dir, const StreamArgs & a) {
    auto model = std::make_shared<const generator::VelocityNetwork>(load_model(a.checkpoint, cfg));
    json meta{{"checkpoint_sha256", streaming::sha256_file(a.checkpoint)},
              {"sample_rate", cfg.audio.sample_rate},
              {"feature_rate", cfg.audio.feature_rate},
              {"sampler_steps", cfg.sampler_steps},
              {"seed", cfg.seed}};

    generator::ReferenceLatent ref;
    std::unique_ptr<streaming::AudioSource> source;
    double duration = cfg.stream_duration_s;
    int conn = -1;
    if (a.listen_port > 0) {
        conn = listen_once(a.listen_port);
        source = std::make_unique<streaming::FdSource>(conn);
        meta["audio"] = "tcp:" + std::to_string(a.listen_port);
    } else if (a.audio == "-") {
        source = std::make_unique<streaming::FdSource>(STDIN_FILENO);
        meta["audio"] = "stdin";
    } else if (!a.audio.empty()) {
        auto pcm = audio::read_pcm(a.audio);
        if (pcm.sample_rate != cfg.audio.sample_rate) throw LoadError("audio sample rate differs from the config");
        duration = static_cast<double>(pcm.samples.size()) / static_cast<double>(pcm.sample_rate);
        meta["audio"] = fs::absolute(a.audio).string();
        meta["audio_sha256"] = streaming::sha256_file(a.audio);
        source = std::make_unique<streaming::VectorSource>(std::move(pcm.samples));
    } else {
        // synthetic speaker derived from the seed
        auto spec = synth::SynthSpec::random(cfg.seed, duration);
        spec.sample_rate = cfg.audio.sample_rate;
        spec.fps = cfg.audio.feature_rate;
        spec.channels = cfg.model.channels;
        const auto sample = synth::generate_sample(spec);
        audio::write_pcm(dir / "audio.f32", sample.audio, spec.sample_rate);
        ref = sample.ref;
        meta["audio"] = "synthetic";
        meta["synthetic_spec_seed"] = spec.seed;
        meta["synthetic_duration_s"] = duration;
        source = std::make_unique<streaming::VectorSource>(sample.audio);
    }
    if (!a.identity.empty()) ref = parse_identity(a.identity, cfg.model.channels);
    if (ref.channels.size() == 0) ref = synth::reference_for({0, 0, 0, 0}, cfg.model.channels);
    meta["reference"] = ref.channels.data();

    streaming::Session session(ref, model, {cfg.audio, cfg.sampler_steps, cfg.seed});
    TeeSink tee;
    streaming::FileSink file(dir / "packets.bin");
    tee.add(file);
    std::unique_ptr<streaming::CsvSink> csv;
    if (a.csv) {
        csv = std::make_unique<streaming::CsvSink>(dir / "latents.csv");
        tee.add(*csv);
    }
    std::unique_ptr<streaming::FdSink> net;
    if (conn >= 0) {
        net = std::make_unique<streaming::FdSink>(conn);
        tee.add(*net);
    }
    const auto report = streaming::run_realtime_loop(session, *source, tee, {.duration_s = duration, .flat_out = a.flat_out});
    tee.flush();
    if (conn >= 0) close(conn);

    meta["chunks"] = report.stats.chunks_emitted;
    meta["frames"] = report.stats.frames_emitted;
    meta["generation_seconds"] = report.stats.wall_time_s;
    meta["elapsed_seconds"] = report.elapsed_s;
    meta["fps"] = report.stats.fps();
    meta["real_time_factor"] = report.stats.real_time_factor(cfg.audio.feature_rate);
    meta["overruns"] = report.overruns;
    meta["rejected_chunks"] = report.stats.rejected_chunks;
    meta["aborted"] = report.aborted;
    meta["error"] = report.error;
    meta["source_exhausted"] = report.source_exhausted;
    write_json(dir / "stream.json", meta);
    write_json(dir / "metrics.json", drift_sync(dir, meta));
    streaming::write_manifest(dir / "manifest.txt", {{"packets.bin.sha256", streaming::sha256_file(dir / "packets.bin")},
                                                     {"checkpoint.sha256", meta["checkpoint_sha256"]},
                                                     {"seed", std::to_string(cfg.seed)}});
    std::cout << report.stats.chunks_emitted << " chunks, " << report.stats.fps() << " fps, RTF "
              << report.stats.real_time_factor(cfg.audio.feature_rate) << ", " << report.overruns << " overruns\n";
    if (report.aborted) {
        std::cerr << "stream aborted: " << report.error << "\n";
        return 1;
    }
    return 0;
}

int cmd_bench(const RunConfig & cfg, const fs::path & dir, const std::string & checkpoint, std::size_t chunks) {
    auto model = std::make_shared<const generator::VelocityNetwork>(
        checkpoint.empty() ? generator::VelocityNetwork(cfg.model, cfg.seed) : load_model(checkpoint, cfg));
    streaming::Session session(synth::reference_for({0.5, -0.5, 0.25, 0.0}, cfg.model.channels), model,
                               {cfg.audio, cfg.sampler_steps, cfg.seed});
    synth::BurstAudioGenerator gen(cfg.seed, cfg.audio.sample_rate);
    streaming::VectorSource source(gen.next(chunks * session.chunk_samples()));
    streaming::CountingSink sink;
    const double duration = static_cast<double>(chunks * cfg.model.chunk_frames) / static_cast<double>(cfg.audio.feature_rate);
    const auto t0 = Clock::now();
    const auto report = streaming::run_realtime_loop(session, source, sink, {.duration_s = duration, .flat_out = true});
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    auto lat = report.stats.per_chunk_latency_s;
    std::sort(lat.begin(), lat.end());
    const json out{{"chunks", sink.count},
                   {"fps", report.stats.fps()},
                   {"stopwatch_fps", static_cast<double>(report.stats.frames_emitted) / secs},
                   {"real_time_factor", report.stats.real_time_factor(cfg.audio.feature_rate)},
                   {"latency_median_s", lat.empty() ? 0.0 : lat[lat.size() / 2]},
                   {"latency_p95_s", lat.empty() ? 0.0 : lat[lat.size() * 95 / 100]},
                   {"sampler_steps", cfg.sampler_steps}};
    write_json(dir / "bench.json", out);
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_eval(const fs::path & run) {
    const json meta = read_json(run / "stream.json");
    const json fresh = drift_sync(run, meta);
    write_json(run / "eval.json", fresh);
    std::cout << fresh.dump(2) << "\n";
    if (fs::exists(run / "metrics.json")) {
        const json stored = read_json(run / "metrics.json");
        if (stored != fresh) {
            std::cerr << "recomputed metrics differ from " << (run / "metrics.json") << "\n";
            return 1;
        }
        std::cout << "recomputed metrics match " << (run / "metrics.json").string() << "\n";
    }
    return 0;
}

int cmd_ablate(const RunConfig & cfg, const fs::path & dir, const std::string & teacher_path) {
    const auto teacher = load_model(teacher_path, cfg);
    eval::AblationConfig ac = cfg.ablation;
    ac.distill = cfg.distill;
    std::ofstream log(dir / "log.txt");
    const auto t0 = Clock::now();
    const auto report = eval::ablate(teacher, ac, [&](const std::string & s) {
        std::cerr << s << "\n";
        log << s << "\n";
    });
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();

    std::ofstream seeds(dir / "seeds.csv");
    seeds << "seed,oracle_drift,control_drift,note\n";
    json per = json::array();
    for (const auto & s : report.seeds) {
        seeds << s.seed << "," << (s.oracle_drift ? std::to_string(*s.oracle_drift) : "") << ","
              << (s.control_drift ? std::to_string(*s.control_drift) : "") << "," << s.note << "\n";
        per.push_back({{"seed", s.seed},
                       {"oracle_drift", s.oracle_drift ? json(*s.oracle_drift) : json(nullptr)},
                       {"control_drift", s.control_drift ? json(*s.control_drift) : json(nullptr)},
                       {"note", s.note}});
    }
    for (const auto & c : report.lambda_curves) {
        const std::string tag = "lambda_" + std::to_string(static_cast<int>(c.lambda));
        std::ofstream steps(dir / (tag + "_steps.csv"));
        steps << "step,k,t_prime,t,dmd_norm,reg_loss\n";
        for (const auto & d : c.diagnostics) {
            steps << d.step << "," << d.k << "," << d.t_prime << "," << d.t << "," << d.dmd_norm << "," << d.reg_loss << "\n";
        }
        std::ofstream drift(dir / (tag + "_drift.csv"));
        drift << "chunk,identity_error\n";
        for (std::size_t j = 0; j < c.drift_per_chunk.size(); ++j) drift << j << "," << c.drift_per_chunk[j] << "\n";
    }
    const json out{{"note", kMetricNote},
                   {"varied_field", eval::config_difference(
                                        [&] { auto d = ac.distill; d.teacher_motion = distill::TeacherMotion::Oracle; return d; }(),
                                        [&] { auto d = ac.distill; d.teacher_motion = distill::TeacherMotion::Predicted; return d; }())},
                   {"median_drift_oracle", report.median_oracle},
                   {"median_drift_control", report.median_control},
                   {"effect", report.effect()},
                   {"oracle_better", report.oracle_better()},
                   {"surviving_seeds", report.surviving},
                   {"seeds", per},
                   {"seconds", secs}};
    write_json(dir / "ablation.json", out);
    streaming::write_manifest(dir / "manifest.txt", {{"teacher.ck.sha256", streaming::sha256_file(teacher_path)}});
    std::cout << "median drift oracle " << report.median_oracle << " vs control " << report.median_control
              << (report.oracle_better() ? " (oracle lower)" : " (oracle NOT lower)") << "\n";
    return 0;
}

// Quick self-tests of gradients and invariants; the full suites live in the test binaries.
int cmd_check(const RunConfig & cfg) {
    int failed = 0;
    auto report = [&](bool ok, const std::string & what) {
        std::cout << (ok ? "PASS " : "FAIL ") << what << "\n";
        failed += !ok;
    };
    numerics::Rng rng(cfg.seed);

    {
        generator::ModelConfig mc = cfg.model;
        mc.hidden = 8;
        mc.blocks = 1;
        generator::VelocityNetwork net(mc, cfg.seed);
        auto pool = synth::training_pool(cfg.seed, 1, 3.0, cfg.audio, mc.chunk_frames, mc.motion_frames);
        const auto batch = generator::make_pretrain_batch(pool, 2, cfg.pretrain.motion, rng);
        const auto grads = numerics::backward(generator::flow_matching_loss(net, batch));
        const auto values = net.parameter_values();
        double worst = 0.0;
        const double h = 1e-3;
        for (std::size_t p = 0; p < values.size(); ++p) {
            const numerics::Array g = grads[net.parameters()[p]];
            for (std::size_t j = 0; j < values[p].size(); j += 7) {
                auto f = [&](double d) {
                    auto v = values;
                    v[p][j] += d;
                    auto probe = net.clone();
                    probe.set_parameter_values(v);
                    return generator::flow_matching_loss(probe, batch).value().item();
                };
                const double fd = (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
                worst = std::max(worst, std::abs(g[j] - fd) / std::max({std::abs(g[j]), std::abs(fd), 1e-4}));
            }
        }
        std::ostringstream msg;
        msg << "flow-matching gradient vs finite differences (worst rel err " << std::scientific << std::setprecision(2) << worst << ")";
        report(worst < 1e-5, msg.str());
    }
    {
        bool ok = true;
        for (int i = 0; i < 200 && ok; ++i) {
            const std::size_t len = rng.uniform_index(0, 2 * cfg.audio.queue_samples());
            audio::AudioSamples raw(len, 0.5F);
            const auto q = audio::build_queue(raw, cfg.audio);
            const std::size_t pad = len < q.samples.size() ? q.samples.size() - len : 0;
            ok = q.samples.size() == cfg.audio.queue_samples() && q.pad_len == pad;
        }
        report(ok, "audio queue length and padding over 200 random lengths");
    }
    {
        generator::ModelConfig mc = cfg.model;
        mc.hidden = 8;
        mc.blocks = 1;
        const generator::VelocityNetwork net(mc, cfg.seed);
        const auto ep = distill::make_episode(synth::generate_sample(synth::SynthSpec::random(cfg.seed, 7.0)), cfg.audio,
                                              mc.chunk_frames, mc.motion_frames);
        bool ok = true;
        for (int i = 0; i < 5; ++i) {
            const auto plan = distill::sample_plan(cfg.distill, rng);
            const auto trace = distill::rollout_student(net, plan, ep, rng);
            const auto replay = distill::replay_final_chunk(net, trace);
            const auto g1 = numerics::backward(numerics::sum_squares(trace.final_output));
            const auto g2 = numerics::backward(numerics::sum_squares(replay));
            for (const auto & p : net.parameters()) ok = ok && g1[p] == g2[p];
        }
        report(ok, "truncated rollout gradients equal constant replay");
    }
    {
        std::size_t singles = 0;
        const auto gt = rng.normal_array({cfg.model.motion_frames, cfg.model.channels});
        for (int i = 0; i < 10000; ++i) singles += generator::sample_motion_context(gt, cfg.pretrain.motion, rng).n_ctx() == 1;
        report(singles >= 800 && singles <= 1200, "single-frame motion rate " + std::to_string(singles / 10000.0));
    }
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"streamhead: streaming audio-driven latent generation on a synthetic task"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON run configuration (schema_version 1)");
    app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) {
        g.seed = s;
        g.seed_set = true;
    }, "seed for every stage; overrides the config");
    app.add_option("--out", g.out, "run directory (default runs/<command>-seed<seed>)");

    std::size_t synth_count = 8;
    double synth_duration = 10.0;
    auto * synth_cmd = app.add_subcommand("synth", "write synthetic sessions: PCM audio, latent packets, manifest");
    synth_cmd->add_option("--count", synth_count, "sessions");
    synth_cmd->add_option("--duration", synth_duration, "seconds per session");

    auto * pretrain_cmd = app.add_subcommand("pretrain", "stage 1: flow-matching teacher");

    std::string teacher;
    std::string motion;
    auto * distill_cmd = app.add_subcommand("distill", "stage 2: few-step student");
    distill_cmd->add_option("--teacher", teacher, "teacher checkpoint")->required();
    distill_cmd->add_option("--teacher-motion", motion, "oracle or predicted")->check(CLI::IsMember({"oracle", "predicted"}));

    StreamArgs sa;
    auto * stream_cmd = app.add_subcommand("stream", "paced live loop over an audio file, stdin, a socket or a synthetic speaker");
    stream_cmd->add_option("--checkpoint", sa.checkpoint, "model checkpoint")->required();
    stream_cmd->add_option("--audio", sa.audio, "f32 PCM file with sidecar, or - for raw f32 on stdin");
    stream_cmd->add_option("--listen", sa.listen_port, "accept one TCP client on 127.0.0.1:PORT; raw f32 in, packets out");
    stream_cmd->add_option("--identity", sa.identity, "reference identity a,b,c,d");
    stream_cmd->add_flag("--flat-out", sa.flat_out, "do not wait for real-time audio arrival");
    stream_cmd->add_flag("--csv", sa.csv, "also write latents.csv");

    std::string bench_ck;
    std::size_t bench_chunks = 100;
    auto * bench_cmd = app.add_subcommand("bench", "flat-out generation throughput");
    bench_cmd->add_option("--checkpoint", bench_ck, "model checkpoint (default: untrained network)");
    bench_cmd->add_option("--chunks", bench_chunks, "chunks to generate");

    std::string eval_run;
    auto * eval_cmd = app.add_subcommand("eval", "recompute metrics from a stream run directory");
    eval_cmd->add_option("--run", eval_run, "run directory written by stream")->required();

    auto * ablate_cmd = app.add_subcommand("ablate", "oracle-guided vs predicted-history teacher");
    ablate_cmd->add_option("--teacher", teacher, "teacher checkpoint")->required();

    auto * check_cmd = app.add_subcommand("check", "gradient and invariant self-tests");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = resolve(g);
        if (eval_cmd->parsed()) return cmd_eval(eval_run);
        if (check_cmd->parsed()) return cmd_check(cfg);
        if (!motion.empty()) cfg.distill.teacher_motion = cli::parse_motion(motion);
        const std::string name = app.get_subcommands().front()->get_name();
        const fs::path dir = open_run(g, cfg, name, argc, argv);
        if (synth_cmd->parsed()) return cmd_synth(cfg, dir, synth_count, synth_duration);
        if (pretrain_cmd->parsed()) return cmd_pretrain(cfg, dir);
        if (distill_cmd->parsed()) return cmd_distill(cfg, dir, teacher);
        if (stream_cmd->parsed()) return cmd_stream(cfg, dir, sa);
        if (bench_cmd->parsed()) return cmd_bench(cfg, dir, bench_ck, bench_chunks);
        if (ablate_cmd->parsed()) return cmd_ablate(cfg, dir, teacher);
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
