#include "streamhead/errors.hpp"
#include "streamhead/synth/data_synth.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

namespace sy = streamhead::synth;
namespace gen = streamhead::generator;

namespace {

double correlation(const std::vector<double> & x, const std::vector<double> & y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

TEST_SUITE("synth") {

TEST_CASE("silent spec has an all-zero mouth channel") {
    auto spec = sy::SynthSpec::random(1, 4.0);
    spec.amplitude = 0.0;
    const auto s = sy::generate_sample(spec);
    for (std::size_t f = 0; f < s.latents.dim(0); ++f) CHECK(s.latents.at(f, gen::kMouthChannel) == 0.0);
}

TEST_CASE("identity channels equal the identity vector in every frame") {
    const auto spec = sy::SynthSpec::random(2, 4.0);
    const auto s = sy::generate_sample(spec);
    REQUIRE(s.latents.dim(0) == 100);
    for (std::size_t f = 0; f < 100; ++f) {
        for (std::size_t i = 0; i < 4; ++i) CHECK(s.latents.at(f, gen::kIdentityBegin + i) == spec.identity[i]);
    }
    for (std::size_t i = 0; i < 4; ++i) CHECK(s.ref.channels[gen::kIdentityBegin + i] == spec.identity[i]);
    CHECK(s.ref.channels[gen::kMouthChannel] == 0.0);
}

TEST_CASE("mouth channel tracks the recomputed smoothed RMS envelope") {
    const auto spec = sy::SynthSpec::random(3, 20.0);
    const auto s = sy::generate_sample(spec);
    // recompute independently: per-frame RMS, then one-pole smoothing
    const std::size_t hop = spec.sample_rate / spec.fps;
    const double alpha = std::exp2(-1.0 / spec.envelope_half_life);
    std::vector<double> env, mouth;
    double e = 0.0;
    for (std::size_t f = 0; f < s.latents.dim(0); ++f) {
        double sq = 0.0;
        for (std::size_t i = f * hop; i < (f + 1) * hop; ++i) sq += double(s.audio[i]) * s.audio[i];
        e = alpha * e + (1 - alpha) * std::sqrt(sq / hop);
        env.push_back(e);
        mouth.push_back(s.latents.at(f, gen::kMouthChannel));
    }
    CHECK(correlation(env, mouth) > 0.999);
}

TEST_CASE("pose channels follow an AR(1) process") {
    auto spec = sy::SynthSpec::random(4, 400.0);
    const auto s = sy::generate_sample(spec);
    for (std::size_t c = gen::kIdentityEnd; c < spec.channels; ++c) {
        std::vector<double> a, b;
        for (std::size_t f = 1; f < s.latents.dim(0); ++f) {
            a.push_back(s.latents.at(f - 1, c));
            b.push_back(s.latents.at(f, c));
        }
        CHECK(correlation(a, b) == doctest::Approx(spec.noise_ar_coeff).epsilon(0.05));
    }
}

TEST_CASE("equal specs give bit-identical samples") {
    const auto spec = sy::SynthSpec::random(5, 3.0);
    const auto a = sy::generate_sample(spec);
    const auto b = sy::generate_sample(spec);
    CHECK(a.audio == b.audio);
    CHECK(a.latents == b.latents);
    CHECK(a.ref.channels == b.ref.channels);
    const auto c = sy::generate_sample(sy::SynthSpec::random(6, 3.0));
    CHECK_FALSE(a.audio == c.audio);
}

TEST_CASE("burst generator output does not depend on read sizes") {
    sy::BurstAudioGenerator one(7, 16000), many(7, 16000);
    const auto whole = one.next(50000);
    streamhead::audio::AudioSamples pieces;
    for (std::size_t n : {1, 999, 16000, 7, 33000 - 7}) {
        const auto p = many.next(n);
        pieces.insert(pieces.end(), p.begin(), p.end());
    }
    CHECK(whole == pieces);
}

TEST_CASE("spec invariants are enforced") {
    auto spec = sy::SynthSpec::random(8, 1.01);
    CHECK_THROWS_AS(sy::generate_sample(spec), streamhead::ContractViolation);
    spec = sy::SynthSpec::random(8, 1.0);
    spec.noise_ar_coeff = 1.0;
    CHECK_THROWS_AS(sy::generate_sample(spec), streamhead::ContractViolation);
}

TEST_CASE("66 frames make exactly two chunks of 33") {
    const auto s = sy::generate_sample(sy::SynthSpec::random(9, 2.64));
    const auto chunks = sy::chunk_dataset(s, {}, 33, 5);
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[1].train.target.frames == s.latents.rows(33, 66));
    CHECK(chunks[1].train.motion_source == s.latents.rows(28, 33));
    CHECK(chunks[0].gt_motion.n_ctx() == 1);
    CHECK(chunks[0].gt_motion.frames.reshaped({8}) == s.ref.channels);
}

TEST_CASE("first chunk queue is padded with 8 s minus 1.32 s of silence") {
    const streamhead::audio::AudioConfig cfg;
    const auto s = sy::generate_sample(sy::SynthSpec::random(10, 4.0));
    const auto chunks = sy::chunk_dataset(s, cfg, 33, 5);
    const auto q = sy::queue_snapshot(s, chunks[0], cfg);
    CHECK(q.pad_len == cfg.queue_samples() - 33 * cfg.hop());
    CHECK(q.pad_len == (8000 - 1320) * 16);
}

TEST_CASE("a sample shorter than one chunk is rejected") {
    const auto s = sy::generate_sample(sy::SynthSpec::random(11, 1.0));
    CHECK_THROWS_AS(sy::chunk_dataset(s, {}, 33, 5), streamhead::ContractViolation);
}

} // TEST_SUITE
