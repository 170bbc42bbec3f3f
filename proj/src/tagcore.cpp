#include "vqn/tagcore.hpp"

#include "vqn/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace vqn {

namespace {

constexpr char kMagic[4] = {'V', 'Q', 'T', 'T'};
constexpr std::uint64_t kMaxRecordCount = (std::uint64_t{1} << 48) - 1;

void check_invariants(const std::vector<TagRecord>& records, Picoseconds duration_ps) {
    if (duration_ps < 0) {
        throw Error(ErrorCode::invalid_argument, "stream duration must be non-negative");
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.timestamp_ps < 0 || r.timestamp_ps > duration_ps) {
            throw Error(ErrorCode::invalid_argument,
                        "timestamp " + std::to_string(r.timestamp_ps) + " outside [0, " +
                            std::to_string(duration_ps) + "]");
        }
        if (i > 0 && records[i] < records[i - 1]) {
            throw Error(ErrorCode::unsorted_records, "records not sorted at index " + std::to_string(i));
        }
    }
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value, int bytes) {
    auto u = static_cast<std::uint64_t>(value);
    for (int i = 0; i < bytes; ++i) {
        out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
    }
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t offset, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
        v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
    }
    return v;
}

bool has_csv_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".csv";
}

std::vector<TagRecord> parse_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::malformed_header, "empty CSV tag file");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != "channel,timestamp_ps") {
        throw Error(ErrorCode::malformed_header, "expected CSV header 'channel,timestamp_ps'");
    }
    std::vector<TagRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw Error(ErrorCode::malformed_header, "CSV line " + std::to_string(line_no) + " lacks a comma");
        }
        try {
            std::size_t used = 0;
            const auto ch = std::stoul(line.substr(0, comma), &used);
            if (used != comma || ch > 0xFFFF) {
                throw std::invalid_argument("channel");
            }
            const auto ts_text = line.substr(comma + 1);
            const auto ts = std::stoll(ts_text, &used);
            if (used != ts_text.size()) {
                throw std::invalid_argument("timestamp");
            }
            records.push_back({static_cast<ChannelIndex>(ch), ts});
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::malformed_header, "CSV line " + std::to_string(line_no) + " is not numeric");
        }
    }
    return records;
}

} // namespace

TagStream::TagStream(std::vector<TagRecord> records, Picoseconds duration_ps, StreamMetadata metadata)
    : records_(std::move(records)), duration_ps_(duration_ps), metadata_(std::move(metadata)) {
    check_invariants(records_, duration_ps_);
}

TagStream TagStream::from_unsorted(std::vector<TagRecord> records, Picoseconds duration_ps,
                                   StreamMetadata metadata) {
    std::sort(records.begin(), records.end());
    return TagStream(std::move(records), duration_ps, std::move(metadata));
}

std::vector<Picoseconds> TagStream::timestamps() const {
    std::vector<Picoseconds> out;
    out.reserve(records_.size());
    for (const auto& r : records_) {
        out.push_back(r.timestamp_ps);
    }
    return out;
}

double itu_frequency_thz(int index) {
    if (index < 1 || index > 100) {
        throw Error(ErrorCode::invalid_channel, "ITU channel " + std::to_string(index) + " outside 1..100");
    }
    return 190.0 + 0.1 * index;
}

double itu_wavelength(int index) { return kSpeedOfLightNmThz / itu_frequency_thz(index); }

ItuChannel itu_channel(int index) {
    const double f = itu_frequency_thz(index);
    return {index, f, kSpeedOfLightNmThz / f};
}

bool is_signal_channel(int channel) noexcept { return channel >= 23 && channel <= 26; }

bool is_supported_channel(int channel) noexcept {
    return is_signal_channel(channel) || (channel >= 16 && channel <= 19);
}

ChannelIndex partner_channel(int channel) {
    if (!is_supported_channel(channel)) {
        throw Error(ErrorCode::unsupported_channel,
                    "channel " + std::to_string(channel) + " is not in the 16-19 / 23-26 pair plan");
    }
    return static_cast<ChannelIndex>(kPairIndexSum - channel);
}

EnergyCheck energy_conservation_check(int signal, double pump_wavelength_nm, double tolerance_thz) {
    if (!(pump_wavelength_nm > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "pump wavelength must be positive");
    }
    const int idler = partner_channel(signal);
    const double pump_thz = kSpeedOfLightNmThz / pump_wavelength_nm;
    const double residual = std::abs(itu_frequency_thz(signal) + itu_frequency_thz(idler) - pump_thz);
    return {residual <= tolerance_thz, residual};
}

std::vector<std::uint8_t> encode_binary(const TagStream& stream) {
    const auto& records = stream.records();
    if (records.size() > kMaxRecordCount) {
        throw Error(ErrorCode::invalid_argument, "too many records for a 48-bit count");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kTagFileHeaderBytes + kTagRecordBytes * records.size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_le(out, kTagFileVersion, 2);
    put_le(out, records.size(), 6);
    for (const auto& r : records) {
        put_le(out, r.channel, 2);
        put_le(out, r.timestamp_ps, 8);
    }
    return out;
}

std::vector<TagRecord> decode_binary(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kTagFileHeaderBytes) {
        throw Error(ErrorCode::truncated_file, "tag file shorter than its 12-byte header");
    }
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin(),
                    [](char m, std::uint8_t b) { return static_cast<std::uint8_t>(m) == b; })) {
        throw Error(ErrorCode::malformed_header, "bad magic, expected VQTT");
    }
    const auto version = get_le(bytes, 4, 2);
    if (version != kTagFileVersion) {
        throw Error(ErrorCode::malformed_header, "unsupported tag file version " + std::to_string(version));
    }
    const auto count = get_le(bytes, 6, 6);
    const auto body = bytes.size() - kTagFileHeaderBytes;
    if (body < count * kTagRecordBytes) {
        throw Error(ErrorCode::truncated_file, "header announces " + std::to_string(count) +
                                                   " records but file holds " +
                                                   std::to_string(body / kTagRecordBytes));
    }
    if (body > count * kTagRecordBytes) {
        throw Error(ErrorCode::malformed_header, "trailing bytes after last record");
    }
    std::vector<TagRecord> records(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto off = kTagFileHeaderBytes + i * kTagRecordBytes;
        records[i].channel = static_cast<ChannelIndex>(get_le(bytes, off, 2));
        records[i].timestamp_ps = static_cast<Picoseconds>(get_le(bytes, off + 2, 8));
        if (i > 0 && records[i] < records[i - 1]) {
            throw Error(ErrorCode::unsorted_records, "records not sorted at index " + std::to_string(i));
        }
    }
    return records;
}

std::filesystem::path metadata_path(const std::filesystem::path& path) {
    auto meta = path;
    meta.replace_extension(".meta.json");
    return meta;
}

void write_stream(const TagStream& stream, const std::filesystem::path& path) {
    if (has_csv_extension(path)) {
        std::ofstream out(path);
        if (!out) {
            throw Error(ErrorCode::io_error, "cannot open " + path.string() + " for writing");
        }
        out << "channel,timestamp_ps\n";
        for (const auto& r : stream.records()) {
            out << r.channel << ',' << r.timestamp_ps << '\n';
        }
    } else {
        const auto bytes = encode_binary(stream);
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw Error(ErrorCode::io_error, "cannot open " + path.string() + " for writing");
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw Error(ErrorCode::io_error, "short write to " + path.string());
        }
    }

    nlohmann::json meta;
    meta["duration_ps"] = stream.duration_ps();
    meta["seed"] = stream.metadata().seed ? nlohmann::json(*stream.metadata().seed) : nlohmann::json(nullptr);
    meta["config_hash"] = stream.metadata().config_hash;
    std::ofstream mout(metadata_path(path));
    if (!mout) {
        throw Error(ErrorCode::io_error, "cannot write metadata for " + path.string());
    }
    mout << meta.dump(2) << '\n';
}

TagStream read_stream(const std::filesystem::path& path) {
    std::vector<TagRecord> records;
    if (has_csv_extension(path)) {
        std::ifstream in(path);
        if (!in) {
            throw Error(ErrorCode::io_error, "cannot open " + path.string());
        }
        records = parse_csv(in);
        for (std::size_t i = 1; i < records.size(); ++i) {
            if (records[i] < records[i - 1]) {
                throw Error(ErrorCode::unsorted_records, "records not sorted at index " + std::to_string(i));
            }
        }
    } else {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw Error(ErrorCode::io_error, "cannot open " + path.string());
        }
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        records = decode_binary(bytes);
    }

    // Without a sibling metadata file the stream spans up to its last tag.
    Picoseconds duration = records.empty() ? 0 : records.back().timestamp_ps;
    StreamMetadata metadata;
    const auto meta_file = metadata_path(path);
    if (std::filesystem::exists(meta_file)) {
        std::ifstream min(meta_file);
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(min);
            duration = meta.at("duration_ps").get<Picoseconds>();
            if (meta.contains("seed") && !meta["seed"].is_null()) {
                metadata.seed = meta["seed"].get<std::uint64_t>();
            }
            metadata.config_hash = meta.value("config_hash", std::string{});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::malformed_header, "bad metadata file " + meta_file.string() + ": " + e.what());
        }
    }
    return TagStream(std::move(records), duration, std::move(metadata));
}

TagStream merge_streams(std::span<const TagStream> streams) {
    if (streams.empty()) {
        return {};
    }
    const auto duration = streams.front().duration_ps();
    std::size_t total = 0;
    for (const auto& s : streams) {
        if (s.duration_ps() != duration) {
            throw Error(ErrorCode::duration_mismatch, "cannot merge streams of different durations");
        }
        total += s.size();
    }
    std::vector<TagRecord> merged;
    merged.reserve(total);
    for (const auto& s : streams) {
        const auto mid = merged.size();
        merged.insert(merged.end(), s.records().begin(), s.records().end());
        std::inplace_merge(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(mid), merged.end());
    }
    // Metadata survives only when every input agrees on it.
    StreamMetadata metadata = streams.front().metadata();
    for (const auto& s : streams) {
        if (!(s.metadata() == metadata)) {
            metadata = {};
            break;
        }
    }
    return TagStream(std::move(merged), duration, std::move(metadata));
}

} // namespace vqn
