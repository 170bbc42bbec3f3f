#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vqn {

using ChannelIndex = std::uint16_t;
using Picoseconds = std::int64_t;

inline constexpr double kSpeedOfLightNmThz = 299792.458;
inline constexpr double kPicosecondsPerSecond = 1e12;

/// One detection event: the detector channel and its arrival time.
struct TagRecord {
    ChannelIndex channel = 0;
    Picoseconds timestamp_ps = 0;

    friend bool operator==(const TagRecord&, const TagRecord&) = default;
    // time first, channel breaks ties
    friend std::strong_ordering operator<=>(const TagRecord& a, const TagRecord& b) {
        if (auto c = a.timestamp_ps <=> b.timestamp_ps; c != 0) {
            return c;
        }
        return a.channel <=> b.channel;
    }
};

struct StreamMetadata {
    std::optional<std::uint64_t> seed;
    std::string config_hash;

    friend bool operator==(const StreamMetadata&, const StreamMetadata&) = default;
};

/// Time-ordered detection records over [0, duration_ps]. Construction
/// validates ordering and range, so every TagStream in flight is sound.
class TagStream {
public:
    TagStream() = default;
    TagStream(std::vector<TagRecord> records, Picoseconds duration_ps, StreamMetadata metadata = {});

    /// Sorts the records first; use when building from unordered sources.
    static TagStream from_unsorted(std::vector<TagRecord> records, Picoseconds duration_ps,
                                   StreamMetadata metadata = {});

    const std::vector<TagRecord>& records() const noexcept { return records_; }
    Picoseconds duration_ps() const noexcept { return duration_ps_; }
    double duration_s() const noexcept { return static_cast<double>(duration_ps_) / kPicosecondsPerSecond; }
    const StreamMetadata& metadata() const noexcept { return metadata_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    /// Timestamps only, in stream order.
    std::vector<Picoseconds> timestamps() const;

    friend bool operator==(const TagStream&, const TagStream&) = default;

private:
    std::vector<TagRecord> records_;
    Picoseconds duration_ps_ = 0;
    StreamMetadata metadata_;
};

struct ItuChannel {
    int index = 0;
    double frequency_thz = 0.0;
    double wavelength_nm = 0.0;
};

ItuChannel itu_channel(int index);
double itu_frequency_thz(int index);
double itu_wavelength(int index);

/// Signal channels 23..26 pair with idlers 19..16; indices always sum to 42.
inline constexpr int kPairIndexSum = 42;
ChannelIndex partner_channel(int channel);
bool is_signal_channel(int channel) noexcept;
bool is_supported_channel(int channel) noexcept;

struct EnergyCheck {
    bool conserved = false;
    double residual_thz = 0.0;
};

inline constexpr double kDefaultEnergyToleranceThz = 0.2;

EnergyCheck energy_conservation_check(int signal, double pump_wavelength_nm,
                                      double tolerance_thz = kDefaultEnergyToleranceThz);

// Binary layout: "VQTT", u16 version, u48 count, then 10-byte records.
inline constexpr std::uint16_t kTagFileVersion = 1;
inline constexpr std::size_t kTagFileHeaderBytes = 12;
inline constexpr std::size_t kTagRecordBytes = 10;

/// Writes the binary tag file plus "<stem>.meta.json" next to it. A ".csv"
/// extension selects the text format instead.
void write_stream(const TagStream& stream, const std::filesystem::path& path);
TagStream read_stream(const std::filesystem::path& path);

std::filesystem::path metadata_path(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_binary(const TagStream& stream);
std::vector<TagRecord> decode_binary(std::span<const std::uint8_t> bytes);

TagStream merge_streams(std::span<const TagStream> streams);

} // namespace vqn
