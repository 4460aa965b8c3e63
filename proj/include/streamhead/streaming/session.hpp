#pragma once

// Live inference: a session owns the rolling audio cache and motion context and emits one latent
// chunk per call; the realtime loop paces audio ingestion and hands packets to a sink thread.

#include "streamhead/audio/audio_context.hpp"
#include "streamhead/generator/flow.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace streamhead::streaming {

struct StreamConfig {
    audio::AudioConfig audio;
    std::size_t sampler_steps = 4;
    std::uint64_t seed = 0;
};

struct StreamStats {
    std::size_t chunks_emitted = 0;
    std::size_t frames_emitted = 0;
    double wall_time_s = 0.0; // summed generation time of emitted chunks
    std::vector<double> per_chunk_latency_s;
    std::size_t rejected_chunks = 0;

    double fps() const { return wall_time_s > 0.0 ? static_cast<double>(frames_emitted) / wall_time_s : 0.0; }
    // generation time / media time; <= 1 keeps up with real time
    double real_time_factor(std::size_t video_fps) const;
};

struct StreamPacket {
    std::uint32_t chunk_index = 0;
    std::uint16_t n_frames = 0;
    std::uint16_t channels = 0;
    numerics::Array payload;            // (n_frames, channels)
    std::uint64_t audio_window_id = 0;  // total samples pushed when the driving queue was built
};

class Session {
public:
    Session(generator::ReferenceLatent ref, std::shared_ptr<const generator::VelocityNetwork> model,
            const StreamConfig & cfg);

    // Loads the checkpoint and requires its config to equal `expected` (LoadError otherwise).
    static Session from_checkpoint(generator::ReferenceLatent ref, const std::filesystem::path & checkpoint,
                                   const generator::ModelConfig & expected, const StreamConfig & cfg);

    std::size_t push_audio(std::span<const float> samples);

    // Queue -> features -> trailing N-frame condition -> sampler -> motion rollover.
    // A non-finite chunk is rejected (nullopt), the session is flagged degraded and its state is kept.
    std::optional<StreamPacket> generate_next_chunk();

    audio::AudioQueue current_queue() const { return cache_.queue(); }
    const generator::MotionContext & motion_context() const { return motion_; }
    const generator::ReferenceLatent & reference() const { return ref_; }
    std::size_t chunk_index() const { return chunk_index_; }
    std::size_t samples_pushed() const { return cache_.total_pushed(); }
    std::size_t chunk_samples() const; // audio samples spanned by one chunk
    const StreamStats & stats() const { return stats_; }
    bool degraded() const { return degraded_; }
    const StreamConfig & config() const { return cfg_; }
    const generator::VelocityNetwork & model() const { return *model_; }

private:
    generator::ReferenceLatent ref_;
    std::shared_ptr<const generator::VelocityNetwork> model_;
    StreamConfig cfg_;
    audio::RollingAudioCache cache_;
    generator::MotionContext motion_;
    numerics::Rng rng_;
    std::size_t chunk_index_ = 0;
    StreamStats stats_;
    bool degraded_ = false;
};

// Wire format, all little-endian: u32 length of the rest, u32 chunk_index, u16 n_frames, u16 C,
// then n_frames * C f32 values row-major. audio_window_id is not transmitted.
std::vector<std::uint8_t> encode_packet(const StreamPacket & p);
// Decodes one packet body (the bytes after the length prefix).
StreamPacket decode_packet_body(std::span<const std::uint8_t> body);
// Splits a byte stream of concatenated packets; throws LoadError on truncation.
std::vector<StreamPacket> decode_stream(std::span<const std::uint8_t> bytes);
std::vector<StreamPacket> read_packet_file(const std::filesystem::path & path);

class AudioSource {
public:
    virtual ~AudioSource() = default;
    // Fills up to out.size() samples; returns fewer only at end of stream.
    virtual std::size_t read(std::span<float> out) = 0;
};

class PacketSink {
public:
    virtual ~PacketSink() = default;
    // Throws on failure.
    virtual void write(const StreamPacket & p) = 0;
    virtual void flush() {}
};

class VectorSource final : public AudioSource {
public:
    explicit VectorSource(audio::AudioSamples samples) : samples_(std::move(samples)) {}
    std::size_t read(std::span<float> out) override;

private:
    audio::AudioSamples samples_;
    std::size_t pos_ = 0;
};

// Raw little-endian f32 samples from a file descriptor (pipe or socket).
class FdSource final : public AudioSource {
public:
    explicit FdSource(int fd) : fd_(fd) {}
    std::size_t read(std::span<float> out) override;

private:
    int fd_;
};

class MemorySink final : public PacketSink {
public:
    void write(const StreamPacket & p) override { packets.push_back(p); }
    std::vector<StreamPacket> packets;
};

// Keeps only a count and the last packet; memory stays flat over arbitrarily long runs.
class CountingSink final : public PacketSink {
public:
    void write(const StreamPacket & p) override {
        ++count;
        last = p;
    }
    std::size_t count = 0;
    std::optional<StreamPacket> last;
};

class FileSink final : public PacketSink {
public:
    explicit FileSink(const std::filesystem::path & path);
    ~FileSink() override;
    void write(const StreamPacket & p) override;
    void flush() override;

private:
    std::FILE * file_;
};

// Writes the wire format to a byte-stream descriptor (socket, pipe).
class FdSink final : public PacketSink {
public:
    explicit FdSink(int fd) : fd_(fd) {}
    void write(const StreamPacket & p) override;

private:
    int fd_;
};

// Per-frame channel values as CSV rows: chunk,frame,c0,...
class CsvSink final : public PacketSink {
public:
    explicit CsvSink(const std::filesystem::path & path);
    ~CsvSink() override;
    void write(const StreamPacket & p) override;
    void flush() override;

private:
    std::FILE * file_;
    std::size_t frame_ = 0;
    bool header_ = false;
};

struct LoopOptions {
    double duration_s = 0.0; // media time to generate; whole chunks only
    bool flat_out = false;   // skip pacing and generate as fast as possible
    std::size_t max_pending = 8; // packets buffered towards the sink thread
};

struct LoopReport {
    StreamStats stats;
    std::size_t packets_written = 0;
    std::size_t overruns = 0; // chunks finished after the next chunk's audio had already arrived
    double elapsed_s = 0.0;   // loop stopwatch
    bool aborted = false;
    std::string error;
    bool source_exhausted = false;
};

// Reads one chunk of audio at a time (waiting for its real-time arrival unless flat_out), pushes it,
// generates, and hands the packet to a sink thread. Packets reach the sink in chunk_index order.
LoopReport run_realtime_loop(Session & session, AudioSource & source, PacketSink & sink, const LoopOptions & opts);

std::string sha256_file(const std::filesystem::path & path);

// key=value lines
void write_manifest(const std::filesystem::path & path,
                    const std::vector<std::pair<std::string, std::string>> & entries);

} // namespace streamhead::streaming
