#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <vector>

namespace vqn::service {

/// Append-only event log. Each entry is one JSON object; append stamps a
/// monotonically increasing "seq" before it is stored.
class Journal {
public:
    virtual ~Journal() = default;
    /// Durable once this returns. Returns the stamped sequence.
    virtual std::uint64_t append(nlohmann::json entry) = 0;
    virtual std::vector<nlohmann::json> entries() const = 0;
};

class MemoryJournal final : public Journal {
public:
    std::uint64_t append(nlohmann::json entry) override;
    std::vector<nlohmann::json> entries() const override;

private:
    mutable std::mutex mu_;
    std::vector<nlohmann::json> entries_;
};

/// One JSON document per line. On open, a torn final line (crash during
/// append) is dropped and the file truncated back to the last full entry;
/// a corrupt line anywhere else is an error.
class FileJournal final : public Journal {
public:
    explicit FileJournal(std::filesystem::path path);

    std::uint64_t append(nlohmann::json entry) override;
    std::vector<nlohmann::json> entries() const override;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::vector<nlohmann::json> entries_;
    std::ofstream out_;
};

std::unique_ptr<Journal> open_journal(const std::filesystem::path& path);

} // namespace vqn::service
