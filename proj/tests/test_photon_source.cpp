#include "vqn/error.hpp"
#include "vqn/measurement.hpp"
#include "vqn/photon_source.hpp"

#include <doctest.h>
#include <omp.h>

#include <cmath>

using namespace vqn;

namespace {

SourceConfig single_pair(double pair_rate, double bg, double jitter, double duration_s, std::uint64_t seed) {
    return SourceConfig{duration_s, {PairConfig{26, 16, pair_rate, bg, bg, jitter}}, seed};
}

} // namespace

TEST_CASE("zero rates give empty streams") {
    const auto streams = generate(single_pair(0, 0, 30, 1.0, 1));
    REQUIRE(streams.size() == 2);
    CHECK(streams.at(26).empty());
    CHECK(streams.at(16).empty());
}

TEST_CASE("pure pairs without jitter land on identical timestamps") {
    const auto streams = generate(single_pair(1000, 0, 0, 10.0, 3));
    const auto& s = streams.at(26);
    const auto& i = streams.at(16);
    CHECK(s.timestamps() == i.timestamps());
    // Poisson(10000): mean 10000, sigma 100
    CHECK(std::abs(static_cast<double>(s.size()) - 10000.0) <= 3.0 * 100.0);
    CHECK(s.duration_ps() == 10'000'000'000'000);
    CHECK(s.metadata().seed == 3u);
}

TEST_CASE("testbed preset") {
    const auto p = testbed_preset();
    REQUIRE(p.pairs.size() == 3);
    CHECK(p.pairs[0].signal == 26);
    CHECK(p.pairs[0].idler == 16);
    CHECK(p.pairs[1].signal == 25);
    CHECK(p.pairs[2].signal == 24);
    CHECK(p.pairs[0].detected_pair_rate_hz == doctest::Approx(53106.45));
    CHECK(p.pairs[1].detected_pair_rate_hz == doctest::Approx(45601.10));
    CHECK(p.pairs[2].detected_pair_rate_hz == doctest::Approx(45738.53));
    for (const auto& pair : p.pairs) {
        CHECK(configured_singles_rate(p, pair.signal) == doctest::Approx(265000.0));
        CHECK(configured_singles_rate(p, pair.idler) == doctest::Approx(265000.0));
        CHECK(pair.jitter_sigma_ps == 30.0);
    }
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("testbed preset singles rates sit in the characterised band") {
    // short acquisition keeps memory modest; sigma of the rate is sqrt(r / T)
    const double duration = 2.0;
    const auto streams = generate(testbed_preset(duration, 5));
    REQUIRE(streams.size() == 6);
    const double sigma = std::sqrt(265000.0 / duration);
    for (const auto& [ch, stream] : streams) {
        CAPTURE(ch);
        const double rate = static_cast<double>(stream.size()) / duration;
        CHECK(std::abs(rate - 265000.0) <= 3.0 * sigma);
        CHECK(rate >= 230000.0);
        CHECK(rate <= 300000.0);
    }
}

TEST_CASE("generation is deterministic and independent of thread count") {
    const auto cfg = SourceConfig{0.2, testbed_preset().pairs, 99};
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto serial = generate(cfg);
    omp_set_num_threads(4);
    const auto threaded = generate(cfg);
    omp_set_num_threads(saved);
    CHECK(serial == threaded);
    CHECK(generate(cfg) == serial);

    auto other = cfg;
    other.seed = 100;
    CHECK_FALSE(generate(other) == serial);
}

TEST_CASE("per-channel counts are Poisson across seeds") {
    // rate 2000/s over 1 s: mean 2000, sigma sqrt(2000)
    int within = 0;
    constexpr int seeds = 200;
    for (int seed = 0; seed < seeds; ++seed) {
        const auto streams = generate(single_pair(500, 1500, 30, 1.0, static_cast<std::uint64_t>(seed)));
        const double n = static_cast<double>(streams.at(26).size());
        within += std::abs(n - 2000.0) <= 4.0 * std::sqrt(2000.0) ? 1 : 0;
    }
    CHECK(within >= seeds * 99 / 100);
}

TEST_CASE("zero background and jitter: one coincidence per emitted pair") {
    const auto streams = generate(single_pair(2000, 0, 0, 5.0, 17));
    const auto& a = streams.at(26);
    const auto& b = streams.at(16);
    for (Picoseconds window : {2, 10, 500}) {
        CoincidenceSpec spec;
        spec.window_ps = window;
        spec.background_width_ps = window;
        spec.background_offset_ps = 1000;
        const auto r = coincidence_count(a, b, spec, 5.0);
        CHECK(r.coincidences == a.size());
        CHECK(r.peak_delay_ps == 0);
    }
}

TEST_CASE("measured accidentals match the Poisson oracle") {
    // two independent background-only channels
    const double duration = 5.0;
    const double rate = 200000.0;
    const auto streams = generate(single_pair(0, rate, 30, duration, 23));
    const auto& a = streams.at(26);
    const auto& b = streams.at(16);
    const auto r = coincidence_count(a, b, CoincidenceSpec{}, duration);
    const double expected = expected_accidental_rate(r.rate_a_hz, r.rate_b_hz, 500e-12);
    // Acc is the mean of two window counts over T
    const double mu = expected * duration;
    const double sigma = std::sqrt(2.0 * mu) / (2.0 * duration);
    CHECK(std::abs(r.accidental_rate_hz - expected) <= 4.0 * sigma);
}

TEST_CASE("expected_accidental_rate") {
    CHECK(expected_accidental_rate(0, 1e5, 500e-12) == 0.0);
    CHECK(expected_accidental_rate(265000, 265000, 500e-12) == doctest::Approx(35.1125));
    CHECK(expected_accidental_rate(100, 100, 1e-3) == doctest::Approx(10.0));
}

TEST_CASE("source configs are validated") {
    auto code_of = [](const SourceConfig& c) {
        try {
            c.validate();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::io_error;
    };
    CHECK(code_of(single_pair(1, 1, 1, 0.0, 1)) == ErrorCode::config_error);
    auto reuse = testbed_preset();
    reuse.pairs[1] = reuse.pairs[0];
    CHECK(code_of(reuse) == ErrorCode::config_error);
    auto four = testbed_preset();
    four.pairs.push_back(PairConfig{23, 19, 1, 1, 1, 1});
    CHECK(code_of(four) == ErrorCode::config_error);
    auto mismatched = single_pair(1, 1, 1, 1.0, 1);
    mismatched.pairs[0].idler = 17;
    CHECK(code_of(mismatched) == ErrorCode::config_error);
    auto negative = single_pair(-1, 1, 1, 1.0, 1);
    CHECK(code_of(negative) == ErrorCode::config_error);
    CHECK_THROWS_AS(generate(single_pair(1, 1, 1, 0.0, 1)), Error);
}

TEST_CASE("source config JSON round-trips") {
    const auto cfg = testbed_preset(12.5, 8);
    const nlohmann::json j = cfg;
    const auto back = j.get<SourceConfig>();
    CHECK(back.duration_s == 12.5);
    CHECK(back.seed == 8u);
    REQUIRE(back.pairs.size() == 3);
    CHECK(back.pairs[2].background_idler_hz == cfg.pairs[2].background_idler_hz);
    CHECK(back.hash() == cfg.hash());
    auto changed = cfg;
    changed.seed = 9;
    CHECK(changed.hash() != cfg.hash());
}
