#include "vqn/photon_source.hpp"

#include "vqn/error.hpp"
#include "vqn/random.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

namespace vqn {

namespace {

// One independent random process feeding one or two channels.
struct Job {
    enum class Kind { pair, background } kind;
    std::size_t pair_index;
    ChannelIndex channel; // background target; unused for pair jobs
    double rate_hz;
};

struct JobOutput {
    std::vector<Picoseconds> first;  // signal tags, or the background channel's tags
    std::vector<Picoseconds> second; // idler tags for pair jobs
};

// Homogeneous Poisson process on [0, duration] via exponential gaps.
template <typename Visit>
void poisson_times(std::mt19937_64& rng, double rate_hz, double duration_ps, Visit&& visit) {
    if (rate_hz <= 0.0) {
        return;
    }
    std::exponential_distribution<double> gap(rate_hz / kPicosecondsPerSecond);
    for (double t = gap(rng); t <= duration_ps; t += gap(rng)) {
        visit(t);
    }
}

JobOutput run_job(const Job& job, const SourceConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double duration_ps = config.duration_s * kPicosecondsPerSecond;
    const auto limit = static_cast<Picoseconds>(std::floor(duration_ps));
    const double expected = job.rate_hz * config.duration_s;
    JobOutput out;
    out.first.reserve(static_cast<std::size_t>(expected + 6.0 * std::sqrt(expected) + 16));

    if (job.kind == Job::Kind::background) {
        poisson_times(rng, job.rate_hz, duration_ps, [&](double t) {
            const auto tag = std::llround(t);
            if (tag <= limit) {
                out.first.push_back(tag);
            }
        });
        return out;
    }

    const auto& pair = config.pairs[job.pair_index];
    out.second.reserve(out.first.capacity());
    std::normal_distribution<double> jitter(0.0, 1.0);
    const double sigma = pair.jitter_sigma_ps;
    auto in_range = [limit](Picoseconds tag) { return tag >= 0 && tag <= limit; };
    poisson_times(rng, job.rate_hz, duration_ps, [&](double t) {
        const double js = sigma > 0.0 ? sigma * jitter(rng) : 0.0;
        const double ji = sigma > 0.0 ? sigma * jitter(rng) : 0.0;
        const auto s = std::llround(t + js);
        const auto i = std::llround(t + ji);
        if (in_range(s)) {
            out.first.push_back(s);
        }
        if (in_range(i)) {
            out.second.push_back(i);
        }
    });
    // jitter can reorder neighbouring emissions
    std::sort(out.first.begin(), out.first.end());
    std::sort(out.second.begin(), out.second.end());
    return out;
}

void require(bool ok, const std::string& message, const std::string& field = {}) {
    if (!ok) {
        throw Error(ErrorCode::config_error, message, field);
    }
}

} // namespace

void SourceConfig::validate() const {
    require(std::isfinite(duration_s) && duration_s > 0.0, "duration_s must be positive", "duration_s");
    require(pairs.size() <= kMaxActivePairs, "at most 3 channel pairs can be detected at once", "pairs");
    std::set<ChannelIndex> used;
    for (const auto& p : pairs) {
        try {
            require(is_signal_channel(p.signal), "signal channel must be one of 23..26", "signal");
            require(p.idler == partner_channel(p.signal), "idler must be the partner of the signal channel", "idler");
        } catch (const Error& e) {
            if (e.code() != ErrorCode::config_error) {
                throw Error(ErrorCode::config_error, e.what(), "signal");
            }
            throw;
        }
        require(used.insert(p.signal).second && used.insert(p.idler).second,
                "channel " + std::to_string(p.signal) + " reused across pairs", "pairs");
        for (double r : {p.detected_pair_rate_hz, p.background_signal_hz, p.background_idler_hz, p.jitter_sigma_ps}) {
            require(std::isfinite(r) && r >= 0.0, "rates and jitter must be finite and non-negative", "pairs");
        }
    }
}

std::string SourceConfig::hash() const {
    nlohmann::json j = *this;
    const auto text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ChannelStreams generate(const SourceConfig& config) {
    config.validate();

    std::vector<Job> jobs;
    for (std::size_t i = 0; i < config.pairs.size(); ++i) {
        const auto& p = config.pairs[i];
        jobs.push_back({Job::Kind::pair, i, 0, p.detected_pair_rate_hz});
        jobs.push_back({Job::Kind::background, i, p.signal, p.background_signal_hz});
        jobs.push_back({Job::Kind::background, i, p.idler, p.background_idler_hz});
    }

    std::vector<JobOutput> outputs(jobs.size());
    const auto n_jobs = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t j = 0; j < n_jobs; ++j) {
        outputs[j] = run_job(jobs[j], config, derive_seed(config.seed, static_cast<std::uint64_t>(j)));
    }

    const auto duration_ps = static_cast<Picoseconds>(std::floor(config.duration_s * kPicosecondsPerSecond));
    const StreamMetadata metadata{config.seed, config.hash()};

    // Jobs come in triples per pair: [pair, signal background, idler background].
    const auto n_channels = static_cast<std::ptrdiff_t>(2 * config.pairs.size());
    std::vector<TagStream> streams(n_channels);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t c = 0; c < n_channels; ++c) {
        const std::size_t pair = static_cast<std::size_t>(c) / 2;
        const bool idler = c % 2 == 1;
        const auto& correlated = idler ? outputs[3 * pair].second : outputs[3 * pair].first;
        const auto& background = outputs[3 * pair + (idler ? 2 : 1)].first;
        const ChannelIndex channel = idler ? config.pairs[pair].idler : config.pairs[pair].signal;

        std::vector<Picoseconds> times(correlated.size() + background.size());
        std::merge(correlated.begin(), correlated.end(), background.begin(), background.end(), times.begin());
        std::vector<TagRecord> records(times.size());
        std::transform(times.begin(), times.end(), records.begin(),
                       [channel](Picoseconds t) { return TagRecord{channel, t}; });
        streams[c] = TagStream(std::move(records), duration_ps, metadata);
    }

    ChannelStreams result;
    for (std::ptrdiff_t c = 0; c < n_channels; ++c) {
        const auto& p = config.pairs[static_cast<std::size_t>(c) / 2];
        result.emplace(c % 2 == 0 ? p.signal : p.idler, std::move(streams[c]));
    }
    return result;
}

double expected_accidental_rate(double rate_a_hz, double rate_b_hz, double window_s) {
    return rate_a_hz * rate_b_hz * window_s;
}

double configured_singles_rate(const SourceConfig& config, ChannelIndex channel) {
    for (const auto& p : config.pairs) {
        if (p.signal == channel) {
            return p.detected_pair_rate_hz + p.background_signal_hz;
        }
        if (p.idler == channel) {
            return p.detected_pair_rate_hz + p.background_idler_hz;
        }
    }
    throw Error(ErrorCode::unknown_channel, "channel " + std::to_string(channel) + " not in source config");
}

SourceConfig testbed_preset(double duration_s, std::uint64_t seed) {
    constexpr double singles = 265000.0;
    auto pair = [&](ChannelIndex signal, double pair_rate) {
        return PairConfig{signal, partner_channel(signal), pair_rate, singles - pair_rate, singles - pair_rate, 30.0};
    };
    return SourceConfig{duration_s, {pair(26, 53106.45), pair(25, 45601.10), pair(24, 45738.53)}, seed};
}

void to_json(nlohmann::json& j, const PairConfig& p) {
    j = nlohmann::json{{"signal", p.signal},
                       {"idler", p.idler},
                       {"detected_pair_rate_hz", p.detected_pair_rate_hz},
                       {"background_signal_hz", p.background_signal_hz},
                       {"background_idler_hz", p.background_idler_hz},
                       {"jitter_sigma_ps", p.jitter_sigma_ps}};
}

void from_json(const nlohmann::json& j, PairConfig& p) {
    p.signal = j.at("signal").get<ChannelIndex>();
    p.idler = j.contains("idler") ? j.at("idler").get<ChannelIndex>() : partner_channel(p.signal);
    p.detected_pair_rate_hz = j.at("detected_pair_rate_hz").get<double>();
    p.background_signal_hz = j.value("background_signal_hz", 0.0);
    p.background_idler_hz = j.value("background_idler_hz", 0.0);
    p.jitter_sigma_ps = j.value("jitter_sigma_ps", 30.0);
}

void to_json(nlohmann::json& j, const SourceConfig& c) {
    j = nlohmann::json{{"duration_s", c.duration_s}, {"pairs", c.pairs}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SourceConfig& c) {
    c.duration_s = j.value("duration_s", 60.0);
    c.pairs = j.at("pairs").get<std::vector<PairConfig>>();
    c.seed = j.value("seed", std::uint64_t{0});
}

} // namespace vqn
