#include "streamhead/audio/audio_context.hpp"
#include "streamhead/errors.hpp"
#include "streamhead/numerics/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

namespace au = streamhead::audio;
using streamhead::numerics::Array;

namespace {

au::AudioConfig rate_1000() {
    au::AudioConfig cfg;
    cfg.sample_rate = 1000;
    cfg.feat_dim = 4;
    return cfg;
}

au::AudioSamples noise(std::size_t n, std::uint64_t seed) {
    streamhead::numerics::Rng rng(seed);
    au::AudioSamples out(n);
    for (auto & s : out) s = static_cast<float>(rng.uniform(-1.0, 1.0));
    return out;
}

} // namespace

TEST_SUITE("audio") {

TEST_CASE("empty history gives a queue of pure padding") {
    const auto q = au::build_queue({}, rate_1000());
    CHECK(q.samples.size() == 8000);
    CHECK(q.pad_len == 8000);
    CHECK(std::all_of(q.samples.begin(), q.samples.end(), [](float s) { return s == 0.0F; }));
}

TEST_CASE("short history is left-padded with silence") {
    const auto raw = noise(3000, 1);
    const auto q = au::build_queue(raw, rate_1000());
    REQUIRE(q.samples.size() == 8000);
    CHECK(q.pad_len == 5000);
    CHECK(std::all_of(q.samples.begin(), q.samples.begin() + 5000, [](float s) { return s == 0.0F; }));
    CHECK(std::equal(raw.begin(), raw.end(), q.samples.begin() + 5000));
}

TEST_CASE("long history keeps the trailing window") {
    const auto raw = noise(10000, 2);
    const auto q = au::build_queue(raw, rate_1000());
    CHECK(q.pad_len == 0);
    CHECK(std::equal(raw.end() - 8000, raw.end(), q.samples.begin()));
}

TEST_CASE("exactly one window of history needs no padding") {
    const au::AudioConfig cfg;
    const auto q = au::build_queue(noise(cfg.queue_samples(), 3), cfg);
    CHECK(q.pad_len == 0);
}

TEST_CASE("config invariants are enforced") {
    au::AudioConfig cfg;
    cfg.sample_rate = 16001;
    CHECK_THROWS_AS(cfg.validate(), streamhead::ContractViolation);
    cfg = {};
    cfg.t_max_s = 8.01;
    CHECK_THROWS_AS(cfg.validate(), streamhead::ContractViolation);
    cfg = {};
    cfg.layers = 4;
    CHECK_THROWS_AS(cfg.validate(), streamhead::ContractViolation);
    CHECK_NOTHROW(au::AudioConfig{}.validate());
}

TEST_CASE("silence encodes to zeros of shape (200, 3, 8)") {
    const au::AudioConfig cfg;
    const auto e = au::encode(au::build_queue({}, cfg), cfg);
    CHECK(e.features.shape() == streamhead::numerics::Shape{200, 3, 8});
    CHECK(std::all_of(e.features.data().begin(), e.features.data().end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("sine RMS feature is a over sqrt 2") {
    const au::AudioConfig cfg;
    const double a = 0.5;
    au::AudioSamples raw(cfg.queue_samples());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = static_cast<float>(a * std::sin(2.0 * std::numbers::pi * 220.0 * static_cast<double>(i) / 16000.0));
    }
    const auto e = au::encode(au::build_queue(raw, cfg), cfg);
    const double expected = a / std::sqrt(2.0);
    for (std::size_t i = 0; i < e.frames(); ++i) {
        // direct RMS over the hop as the oracle
        double sq = 0.0;
        for (std::size_t s = i * cfg.hop(); s < (i + 1) * cfg.hop(); ++s) sq += static_cast<double>(raw[s]) * raw[s];
        const double direct = std::sqrt(sq / static_cast<double>(cfg.hop()));
        CHECK(e.features.at(i, 0, 0) == doctest::Approx(direct).epsilon(1e-6));
        CHECK(std::abs(e.features.at(i, 0, 0) - expected) < 0.02 * expected);
    }
}

TEST_CASE("feature shape is fixed for any input length") {
    const au::AudioConfig cfg = rate_1000();
    for (std::size_t n : {0, 1, 39, 40, 7999, 8000, 12345}) {
        const auto e = au::encode(au::build_queue(noise(n, n), cfg), cfg);
        CHECK(e.features.shape() == streamhead::numerics::Shape{cfg.feature_frames(), cfg.layers, cfg.feat_dim});
    }
}

TEST_CASE("condition window is the trailing N rows") {
    const au::AudioConfig cfg;
    const auto e = au::encode(au::build_queue(noise(100000, 4), cfg), cfg);
    REQUIRE(e.frames() == 200);

    const auto w = au::extract_condition(e, 33);
    CHECK(w.n_frames == 33);
    for (std::size_t r = 0; r < 33; ++r) {
        for (std::size_t l = 0; l < 3; ++l) {
            for (std::size_t d = 0; d < 8; ++d) CHECK(w.features.at(r, l, d) == e.features.at(167 + r, l, d));
        }
    }
    CHECK(au::extract_condition(e, 200).features == e.features);
    const auto last = au::extract_condition(e, 1);
    CHECK(last.features.at(0, 2, 5) == e.features.at(199, 2, 5));
    CHECK_THROWS_AS(au::extract_condition(e, 0), streamhead::ContractViolation);
    CHECK_THROWS_AS(au::extract_condition(e, 201), streamhead::ContractViolation);
}

TEST_CASE("rolling cache fed in slices equals one-shot construction") {
    const au::AudioConfig cfg;
    const auto raw = noise(20 * 16000, 5);
    au::RollingAudioCache cache(cfg);
    const std::size_t slice = 4000; // 0.25 s
    for (std::size_t at = 0; at < raw.size(); at += slice) {
        cache.push(std::span(raw).subspan(at, slice));
        CHECK(cache.queue() == au::build_queue(std::span(raw).first(at + slice), cfg));
    }
    CHECK(cache.retained() == cfg.queue_samples());
    CHECK(cache.total_pushed() == raw.size());
}

TEST_CASE("rolling cache fed sample by sample equals one-shot construction") {
    const au::AudioConfig cfg = rate_1000();
    const auto raw = noise(9500, 6);
    au::RollingAudioCache cache(cfg);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        cache.push(std::span(raw).subspan(i, 1));
        if (i % 97 == 0 || i + 1 == raw.size()) {
            REQUIRE(cache.queue() == au::build_queue(std::span(raw).first(i + 1), cfg));
        }
    }
}

TEST_CASE("last condition frame depends only on the newest hop") {
    const au::AudioConfig cfg;
    auto a = noise(3 * 16000, 7);
    auto b = noise(5 * 16000, 8);
    std::copy(a.end() - static_cast<std::ptrdiff_t>(cfg.hop()), a.end(), b.end() - static_cast<std::ptrdiff_t>(cfg.hop()));
    const auto wa = au::condition_from_history(a, cfg, 1);
    const auto wb = au::condition_from_history(b, cfg, 1);
    CHECK(wa.features == wb.features);
}

TEST_CASE("shifting audio by one hop shifts features by one row") {
    const au::AudioConfig cfg;
    const auto raw = noise(cfg.queue_samples() + cfg.hop(), 9);
    const auto ea = au::encode(au::build_queue(std::span(raw).first(cfg.queue_samples()), cfg), cfg);
    const auto eb = au::encode(au::build_queue(raw, cfg), cfg);
    const std::size_t row = cfg.layers * cfg.feat_dim;
    for (std::size_t i = 0; i + 1 < ea.frames(); ++i) {
        CHECK(std::equal(eb.features.data().begin() + i * row, eb.features.data().begin() + (i + 1) * row,
                         ea.features.data().begin() + (i + 1) * row));
    }
}

TEST_CASE("pcm files round-trip with their sidecar") {
    const auto path = std::filesystem::temp_directory_path() / "streamhead_audio_test.f32";
    const auto raw = noise(1234, 10);
    au::write_pcm(path, raw, 16000);
    const auto back = au::read_pcm(path);
    CHECK(back.sample_rate == 16000);
    CHECK(back.samples == raw);
    std::filesystem::remove(path);
    std::filesystem::remove(au::meta_path(path));
    CHECK_THROWS_AS(au::read_pcm(path), streamhead::LoadError);
}

} // TEST_SUITE
