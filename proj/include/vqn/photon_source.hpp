#pragma once

#include "vqn/tagcore.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vqn {

/// One signal/idler channel pair. Rates are detected rates: detector
/// efficiency and dark counts are already folded in.
struct PairConfig {
    ChannelIndex signal = 0;
    ChannelIndex idler = 0;
    double detected_pair_rate_hz = 0.0;
    double background_signal_hz = 0.0;
    double background_idler_hz = 0.0;
    double jitter_sigma_ps = 30.0;
};

/// Six detectors, so at most three pairs at once.
inline constexpr std::size_t kMaxActivePairs = 3;

struct SourceConfig {
    double duration_s = 60.0;
    std::vector<PairConfig> pairs;
    std::uint64_t seed = 0;

    /// Throws ErrorCode::config_error describing the first violated rule.
    void validate() const;
    /// Stable FNV-1a digest of the canonical JSON form, written to stream metadata.
    std::string hash() const;
};

using ChannelStreams = std::map<ChannelIndex, TagStream>;

/// Poisson pair emissions with Gaussian detector jitter plus independent
/// Poisson background on every channel. Pure function of the config: each
/// pair and background process draws from its own seed-derived generator,
/// so the result does not depend on the OpenMP thread count.
ChannelStreams generate(const SourceConfig& config);

/// Expected chance-coincidence rate of two independent Poisson streams.
double expected_accidental_rate(double rate_a_hz, double rate_b_hz, double window_s);

/// Three pairs tuned to the characterised testbed: ~265k singles per channel.
SourceConfig testbed_preset(double duration_s = 60.0, std::uint64_t seed = 1);

/// Total singles rate the config produces on one channel.
double configured_singles_rate(const SourceConfig& config, ChannelIndex channel);

void to_json(nlohmann::json& j, const PairConfig& p);
void from_json(const nlohmann::json& j, PairConfig& p);
void to_json(nlohmann::json& j, const SourceConfig& c);
void from_json(const nlohmann::json& j, SourceConfig& c);

} // namespace vqn
