#include "streamhead/streaming/session.hpp"

#include "streamhead/errors.hpp"

#include <openssl/evp.h>

#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace streamhead::streaming {

using numerics::Array;
using numerics::Shape;
using Clock = std::chrono::steady_clock;

static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");

double StreamStats::real_time_factor(std::size_t video_fps) const {
    if (frames_emitted == 0) return 0.0;
    return wall_time_s / (static_cast<double>(frames_emitted) / static_cast<double>(video_fps));
}

Session::Session(generator::ReferenceLatent ref, std::shared_ptr<const generator::VelocityNetwork> model,
                 const StreamConfig & cfg)
    : ref_(std::move(ref)), model_(std::move(model)), cfg_(cfg), cache_(cfg.audio), rng_(cfg.seed) {
    STREAMHEAD_REQUIRE(model_ != nullptr, "session needs a model");
    cfg_.audio.validate();
    const auto & mc = model_->config();
    STREAMHEAD_REQUIRE(ref_.channels.rank() == 1 && ref_.channels.size() == mc.channels,
                       "reference latent does not match the model's channel count");
    STREAMHEAD_REQUIRE(mc.audio_layers == cfg_.audio.layers && mc.feat_dim == cfg_.audio.feat_dim,
                       "audio feature shape does not match the model");
    STREAMHEAD_REQUIRE(cfg_.sampler_steps >= 1, "sampler_steps must be at least 1");
    motion_ = generator::MotionContext::single(ref_.channels);
}

Session Session::from_checkpoint(generator::ReferenceLatent ref, const std::filesystem::path & checkpoint,
                                 const generator::ModelConfig & expected, const StreamConfig & cfg) {
    auto net = std::make_shared<const generator::VelocityNetwork>(generator::VelocityNetwork::load(checkpoint, expected));
    return Session(std::move(ref), std::move(net), cfg);
}

std::size_t Session::push_audio(std::span<const float> samples) { return cache_.push(samples); }

std::size_t Session::chunk_samples() const { return model_->config().chunk_frames * cfg_.audio.hop(); }

std::optional<StreamPacket> Session::generate_next_chunk() {
    const auto & mc = model_->config();
    const auto begin = Clock::now();
    const auto features = audio::encode(cache_.queue(), cfg_.audio);
    const generator::Conditions cond{ref_, motion_, audio::extract_condition(features, mc.chunk_frames)};
    generator::LatentChunk chunk = generator::generate_chunk(*model_, cond, cfg_.sampler_steps, rng_);
    const double latency = std::chrono::duration<double>(Clock::now() - begin).count();

    if (!chunk.frames.all_finite()) {
        degraded_ = true;
        ++stats_.rejected_chunks;
        return std::nullopt;
    }
    StreamPacket p;
    p.chunk_index = static_cast<std::uint32_t>(chunk_index_);
    p.n_frames = static_cast<std::uint16_t>(chunk.n_frames());
    p.channels = static_cast<std::uint16_t>(chunk.channels());
    p.audio_window_id = cache_.total_pushed();
    motion_ = generator::MotionContext::tail(chunk, mc.motion_frames);
    p.payload = std::move(chunk.frames);
    ++chunk_index_;
    ++stats_.chunks_emitted;
    stats_.frames_emitted += p.n_frames;
    stats_.wall_time_s += latency;
    stats_.per_chunk_latency_s.push_back(latency);
    return p;
}

namespace {

void put_u32(std::vector<std::uint8_t> & out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t> & out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

constexpr std::size_t kHeaderBytes = 8;

void write_all(int fd, std::span<const std::uint8_t> bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error(std::string("sink write failed: ") + std::strerror(errno));
        }
        done += static_cast<std::size_t>(n);
    }
}

} // namespace

std::vector<std::uint8_t> encode_packet(const StreamPacket & p) {
    STREAMHEAD_REQUIRE(p.payload.rank() == 2 && p.payload.dim(0) == p.n_frames && p.payload.dim(1) == p.channels,
                       "payload shape disagrees with the packet header");
    const std::size_t body = kHeaderBytes + p.payload.size() * sizeof(float);
    std::vector<std::uint8_t> out;
    out.reserve(4 + body);
    put_u32(out, static_cast<std::uint32_t>(body));
    put_u32(out, p.chunk_index);
    put_u16(out, p.n_frames);
    put_u16(out, p.channels);
    for (double v : p.payload.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

StreamPacket decode_packet_body(std::span<const std::uint8_t> body) {
    if (body.size() < kHeaderBytes) throw LoadError("packet shorter than its header");
    StreamPacket p;
    p.chunk_index = get_u32(body, 0);
    p.n_frames = get_u16(body, 4);
    p.channels = get_u16(body, 6);
    const std::size_t count = static_cast<std::size_t>(p.n_frames) * p.channels;
    if (body.size() != kHeaderBytes + count * sizeof(float)) throw LoadError("packet payload length mismatch");
    p.payload = Array(Shape{p.n_frames, p.channels});
    for (std::size_t i = 0; i < count; ++i) {
        p.payload[i] = std::bit_cast<float>(get_u32(body, kHeaderBytes + 4 * i));
    }
    return p;
}

std::vector<StreamPacket> decode_stream(std::span<const std::uint8_t> bytes) {
    std::vector<StreamPacket> out;
    std::size_t at = 0;
    while (at < bytes.size()) {
        if (bytes.size() - at < 4) throw LoadError("truncated length prefix");
        const std::size_t len = get_u32(bytes, at);
        at += 4;
        if (bytes.size() - at < len) throw LoadError("truncated packet");
        out.push_back(decode_packet_body(bytes.subspan(at, len)));
        at += len;
    }
    return out;
}

std::vector<StreamPacket> read_packet_file(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open packet file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_stream(bytes);
}

std::size_t VectorSource::read(std::span<float> out) {
    const std::size_t n = std::min(out.size(), samples_.size() - pos_);
    std::copy_n(samples_.begin() + static_cast<std::ptrdiff_t>(pos_), n, out.begin());
    pos_ += n;
    return n;
}

std::size_t FdSource::read(std::span<float> out) {
    auto * dst = reinterpret_cast<std::uint8_t *>(out.data());
    const std::size_t want = out.size_bytes();
    std::size_t got = 0;
    while (got < want) {
        const ssize_t n = ::read(fd_, dst + got, want - got);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error(std::string("audio source read failed: ") + std::strerror(errno));
        }
        if (n == 0) break;
        got += static_cast<std::size_t>(n);
    }
    return got / sizeof(float);
}

FileSink::FileSink(const std::filesystem::path & path) : file_(std::fopen(path.c_str(), "wb")) {
    if (file_ == nullptr) throw std::runtime_error("cannot open sink file " + path.string());
}

FileSink::~FileSink() { std::fclose(file_); }

void FileSink::write(const StreamPacket & p) {
    const auto bytes = encode_packet(p);
    if (std::fwrite(bytes.data(), 1, bytes.size(), file_) != bytes.size()) throw std::runtime_error("sink file write failed");
}

void FileSink::flush() { std::fflush(file_); }

void FdSink::write(const StreamPacket & p) { write_all(fd_, encode_packet(p)); }

CsvSink::CsvSink(const std::filesystem::path & path) : file_(std::fopen(path.c_str(), "w")) {
    if (file_ == nullptr) throw std::runtime_error("cannot open csv sink " + path.string());
}

CsvSink::~CsvSink() { std::fclose(file_); }

void CsvSink::write(const StreamPacket & p) {
    if (!header_) {
        std::fprintf(file_, "chunk,frame");
        for (std::size_t c = 0; c < p.channels; ++c) std::fprintf(file_, ",c%zu", c);
        std::fprintf(file_, "\n");
        header_ = true;
    }
    for (std::size_t r = 0; r < p.n_frames; ++r, ++frame_) {
        std::fprintf(file_, "%u,%zu", p.chunk_index, frame_);
        for (std::size_t c = 0; c < p.channels; ++c) std::fprintf(file_, ",%.9g", p.payload.at(r, c));
        std::fprintf(file_, "\n");
    }
    if (std::ferror(file_)) throw std::runtime_error("csv sink write failed");
}

void CsvSink::flush() { std::fflush(file_); }

LoopReport run_realtime_loop(Session & session, AudioSource & source, PacketSink & sink, const LoopOptions & opts) {
    STREAMHEAD_REQUIRE(opts.duration_s >= 0.0, "negative duration");
    STREAMHEAD_REQUIRE(opts.max_pending >= 1, "max_pending must be at least 1");
    const auto & acfg = session.config().audio;
    const std::size_t chunk_samples = session.chunk_samples();
    const std::size_t chunk_frames = session.model().config().chunk_frames;
    const auto n_chunks = static_cast<std::size_t>(
        std::floor(opts.duration_s * static_cast<double>(acfg.feature_rate) / static_cast<double>(chunk_frames) + 1e-9));
    const auto chunk_duration = std::chrono::duration<double>(static_cast<double>(chunk_samples) /
                                                              static_cast<double>(acfg.sample_rate));

    LoopReport report;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<StreamPacket> pending;
    bool closed = false;
    bool failed = false;
    std::string error;
    std::size_t written = 0;

    std::thread writer([&] {
        for (;;) {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return !pending.empty() || closed; });
            if (pending.empty()) break;
            StreamPacket p = std::move(pending.front());
            pending.pop_front();
            lock.unlock();
            cv.notify_all();
            try {
                sink.write(p);
            } catch (const std::exception & e) {
                lock.lock();
                failed = true;
                error = e.what();
                pending.clear();
                cv.notify_all();
                return;
            }
            lock.lock();
            ++written;
        }
    });

    const auto start = Clock::now();
    std::vector<float> buf(chunk_samples);
    for (std::size_t j = 0; j < n_chunks; ++j) {
        {
            std::lock_guard lock(mu);
            if (failed) break;
        }
        if (!opts.flat_out) {
            std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>((j + 1) * chunk_duration));
        }
        const std::size_t got = source.read(buf);
        if (got < chunk_samples) {
            session.push_audio(std::span(buf).first(got));
            report.source_exhausted = true;
            break;
        }
        session.push_audio(buf);
        auto packet = session.generate_next_chunk();
        if (!opts.flat_out &&
            Clock::now() > start + std::chrono::duration_cast<Clock::duration>((j + 2) * chunk_duration)) {
            ++report.overruns;
            std::cerr << "warning: chunk " << j << " finished after the next chunk's audio arrived, real-time factor > 1\n";
        }
        if (!packet) continue;
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return pending.size() < opts.max_pending || failed; });
        if (failed) break;
        pending.push_back(std::move(*packet));
        lock.unlock();
        cv.notify_all();
    }
    {
        std::lock_guard lock(mu);
        closed = true;
    }
    cv.notify_all();
    writer.join();
    if (!failed) {
        try {
            sink.flush();
        } catch (const std::exception & e) {
            failed = true;
            error = e.what();
        }
    }
    report.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();
    report.stats = session.stats();
    report.packets_written = written;
    report.aborted = failed;
    report.error = error;
    return report;
}

std::string sha256_file(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string() + " for hashing");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    std::string hex;
    static constexpr char kDigits[] = "0123456789abcdef";
    for (unsigned int i = 0; i < len; ++i) {
        hex += kDigits[digest[i] >> 4];
        hex += kDigits[digest[i] & 0xf];
    }
    return hex;
}

void write_manifest(const std::filesystem::path & path, const std::vector<std::pair<std::string, std::string>> & entries) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    for (const auto & [k, v] : entries) out << k << '=' << v << '\n';
}

} // namespace streamhead::streaming
