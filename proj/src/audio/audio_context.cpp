#include "streamhead/audio/audio_context.hpp"

#include "streamhead/errors.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace streamhead::audio {

using numerics::Array;
using numerics::Shape;

static_assert(std::endian::native == std::endian::little, "PCM and packet I/O assume a little-endian host");

namespace {

bool is_integral(double x) { return std::abs(x - std::round(x)) < 1e-9; }

double rms(std::span<const float> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (float v : x) acc += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(acc / static_cast<double>(x.size()));
}

double zero_crossing_rate(std::span<const float> x) {
    if (x.size() < 2) return 0.0;
    std::size_t crossings = 0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        if ((x[i - 1] < 0.0F && x[i] >= 0.0F) || (x[i - 1] >= 0.0F && x[i] < 0.0F)) {
            // a run of exact zeros is silence, not a crossing
            if (x[i - 1] != 0.0F || x[i] != 0.0F) ++crossings;
        }
    }
    return static_cast<double>(crossings) / static_cast<double>(x.size() - 1);
}

double goertzel_amplitude(std::span<const float> x, double freq, double rate) {
    const double w = 2.0 * std::numbers::pi * freq / rate;
    const double coeff = 2.0 * std::cos(w);
    double s1 = 0.0, s2 = 0.0;
    for (float v : x) {
        const double s0 = static_cast<double>(v) + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    const double power = std::max(0.0, s1 * s1 + s2 * s2 - coeff * s1 * s2);
    return 2.0 * std::sqrt(power) / static_cast<double>(x.size());
}

std::span<const float> sub_window(std::span<const float> hop, std::size_t i, std::size_t count) {
    const std::size_t b = i * hop.size() / count;
    const std::size_t e = (i + 1) * hop.size() / count;
    return hop.subspan(b, e - b);
}

} // namespace

void AudioConfig::validate() const {
    STREAMHEAD_REQUIRE(sample_rate > 0 && feature_rate > 0 && t_max_s > 0.0, "rates and window must be positive");
    STREAMHEAD_REQUIRE(sample_rate % feature_rate == 0, "sample_rate must be divisible by feature_rate");
    STREAMHEAD_REQUIRE(is_integral(t_max_s * static_cast<double>(feature_rate)),
                       "t_max * feature_rate must be an integer");
    STREAMHEAD_REQUIRE(is_integral(t_max_s * static_cast<double>(sample_rate)), "t_max * sample_rate must be an integer");
    STREAMHEAD_REQUIRE(layers >= 1 && layers <= 3, "encoder supports 1..3 layers");
    STREAMHEAD_REQUIRE(feat_dim >= 2 && hop() >= 2 * feat_dim, "hop too short for feat_dim sub-windows");
}

std::size_t AudioConfig::queue_samples() const {
    return static_cast<std::size_t>(std::llround(t_max_s * static_cast<double>(sample_rate)));
}

std::size_t AudioConfig::feature_frames() const {
    return static_cast<std::size_t>(std::llround(t_max_s * static_cast<double>(feature_rate)));
}

AudioQueue build_queue(std::span<const float> raw, const AudioConfig & cfg) {
    const std::size_t len = cfg.queue_samples();
    AudioQueue q;
    q.samples.assign(len, 0.0F);
    if (raw.size() < len) {
        q.pad_len = len - raw.size();
        std::copy(raw.begin(), raw.end(), q.samples.begin() + static_cast<std::ptrdiff_t>(q.pad_len));
    } else {
        q.pad_len = 0;
        std::copy(raw.end() - static_cast<std::ptrdiff_t>(len), raw.end(), q.samples.begin());
    }
    return q;
}

AudioFeatureSequence encode(const AudioQueue & queue, const AudioConfig & cfg) {
    cfg.validate();
    STREAMHEAD_REQUIRE(queue.samples.size() == cfg.queue_samples(), "queue length does not match config");
    STREAMHEAD_REQUIRE(queue.pad_len <= queue.samples.size(), "pad_len exceeds queue");
    const std::size_t frames = cfg.feature_frames();
    const std::size_t hop = cfg.hop();
    const std::size_t dim = cfg.feat_dim;
    const double rate = static_cast<double>(cfg.sample_rate);

    std::vector<double> band_freqs(dim);
    const double f_lo = rate / 160.0, f_hi = rate * 0.4;
    for (std::size_t b = 0; b < dim; ++b) {
        band_freqs[b] = f_lo * std::pow(f_hi / f_lo, static_cast<double>(b) / static_cast<double>(dim - 1));
    }

    Array out(Shape{frames, cfg.layers, dim});
    const std::span<const float> all(queue.samples);
    for (std::size_t f = 0; f < frames; ++f) {
        const auto window = all.subspan(f * hop, hop);
        out.at(f, 0, 0) = rms(window);
        for (std::size_t d = 1; d < dim; ++d) out.at(f, 0, d) = rms(sub_window(window, d - 1, dim - 1));
        if (cfg.layers > 1) {
            for (std::size_t d = 0; d < dim; ++d) out.at(f, 1, d) = zero_crossing_rate(sub_window(window, d, dim));
        }
        if (cfg.layers > 2) {
            for (std::size_t d = 0; d < dim; ++d) out.at(f, 2, d) = goertzel_amplitude(window, band_freqs[d], rate);
        }
    }
    return {std::move(out)};
}

ConditionWindow extract_condition(const AudioFeatureSequence & e, std::size_t n) {
    const std::size_t s = e.frames();
    STREAMHEAD_REQUIRE(n >= 1 && n <= s, "N=" + std::to_string(n) + " outside [1, " + std::to_string(s) + "]");
    return {e.features.rows(s - n, s), n};
}

ConditionWindow condition_from_history(std::span<const float> raw, const AudioConfig & cfg, std::size_t n) {
    return extract_condition(encode(build_queue(raw, cfg), cfg), n);
}

RollingAudioCache::RollingAudioCache(const AudioConfig & cfg) : capacity_(cfg.queue_samples()) {
    buffer_.reserve(2 * capacity_);
}

std::size_t RollingAudioCache::push(std::span<const float> samples) {
    total_ += samples.size();
    if (samples.size() >= capacity_) {
        buffer_.assign(samples.end() - static_cast<std::ptrdiff_t>(capacity_), samples.end());
        start_ = 0;
        return samples.size();
    }
    if (buffer_.size() + samples.size() > 2 * capacity_) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(start_));
        start_ = 0;
    }
    buffer_.insert(buffer_.end(), samples.begin(), samples.end());
    if (retained() > capacity_) start_ = buffer_.size() - capacity_;
    return samples.size();
}

AudioQueue RollingAudioCache::queue() const {
    AudioQueue q;
    q.samples.assign(capacity_, 0.0F);
    const auto v = view();
    q.pad_len = capacity_ - v.size();
    std::copy(v.begin(), v.end(), q.samples.begin() + static_cast<std::ptrdiff_t>(q.pad_len));
    return q;
}

std::filesystem::path meta_path(const std::filesystem::path & pcm_path) {
    auto p = pcm_path;
    p += ".meta";
    return p;
}

void write_pcm(const std::filesystem::path & path, std::span<const float> samples, std::size_t sample_rate) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw LoadError("cannot open " + path.string() + " for writing");
        out.write(reinterpret_cast<const char *>(samples.data()),
                  static_cast<std::streamsize>(samples.size() * sizeof(float)));
    }
    std::ofstream meta(meta_path(path));
    if (!meta) throw LoadError("cannot write " + meta_path(path).string());
    std::ostringstream dur;
    dur.precision(17);
    dur << static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
    meta << "sample_rate=" << sample_rate << "\n" << "duration_s=" << dur.str() << "\n";
}

PcmFile read_pcm(const std::filesystem::path & path) {
    std::ifstream meta(meta_path(path));
    if (!meta) throw LoadError("missing sidecar " + meta_path(path).string());
    PcmFile f;
    double duration = -1.0;
    std::string line;
    while (std::getline(meta, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw LoadError("malformed sidecar line: " + line);
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        try {
            if (key == "sample_rate") f.sample_rate = std::stoul(value);
            else if (key == "duration_s") duration = std::stod(value);
            else throw LoadError("unknown sidecar key: " + key);
        } catch (const std::invalid_argument &) {
            throw LoadError("bad sidecar value for " + key);
        }
    }
    if (f.sample_rate == 0) throw LoadError("sidecar lacks sample_rate");

    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw LoadError("cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(float) != 0) throw LoadError("PCM file size is not a multiple of 4");
    f.samples.resize(bytes / sizeof(float));
    in.seekg(0);
    in.read(reinterpret_cast<char *>(f.samples.data()), static_cast<std::streamsize>(bytes));
    if (duration >= 0.0) {
        const double actual = static_cast<double>(f.samples.size()) / static_cast<double>(f.sample_rate);
        if (std::abs(actual - duration) > 1.0 / static_cast<double>(f.sample_rate)) {
            throw LoadError("sidecar duration_s disagrees with PCM length");
        }
    }
    return f;
}

} // namespace streamhead::audio
