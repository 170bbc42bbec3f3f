#include "vqn/service/journal.hpp"

#include "vqn/error.hpp"

#include <spdlog/spdlog.h>

#include <string>

namespace vqn::service {

std::uint64_t MemoryJournal::append(nlohmann::json entry) {
    std::lock_guard lock(mu_);
    const std::uint64_t seq = entries_.size() + 1;
    entry["seq"] = seq;
    entries_.push_back(std::move(entry));
    return seq;
}

std::vector<nlohmann::json> MemoryJournal::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

FileJournal::FileJournal(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
    std::uintmax_t good_bytes = 0;
    bool torn = false;
    {
        std::ifstream in(path_, std::ios::binary);
        std::string line;
        std::size_t line_no = 0;
        while (in.good()) {
            line.clear();
            if (!std::getline(in, line)) {
                break;
            }
            ++line_no;
            const bool complete = !in.eof();
            if (line.empty() && complete) {
                good_bytes += 1;
                continue;
            }
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error&) {
                if (!complete || in.peek() == std::char_traits<char>::eof()) {
                    torn = true;
                    break;
                }
                throw Error(ErrorCode::io_error,
                            "journal " + path_.string() + " is corrupt at line " + std::to_string(line_no));
            }
            if (!complete) {
                // parsed but never newline-terminated: the append did not finish
                torn = true;
                break;
            }
            if (j.value("seq", std::uint64_t{0}) != entries_.size() + 1) {
                throw Error(ErrorCode::io_error,
                            "journal " + path_.string() + " has a sequence gap at line " + std::to_string(line_no));
            }
            entries_.push_back(std::move(j));
            good_bytes += line.size() + 1;
        }
    }
    if (torn) {
        spdlog::warn("journal {}: dropping torn final entry", path_.string());
        std::filesystem::resize_file(path_, good_bytes);
    }
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) {
        throw Error(ErrorCode::io_error, "cannot open journal " + path_.string());
    }
}

std::uint64_t FileJournal::append(nlohmann::json entry) {
    std::lock_guard lock(mu_);
    const std::uint64_t seq = entries_.size() + 1;
    entry["seq"] = seq;
    out_ << entry.dump() << '\n';
    out_.flush();
    if (!out_) {
        throw Error(ErrorCode::io_error, "journal write failed: " + path_.string());
    }
    entries_.push_back(std::move(entry));
    return seq;
}

std::vector<nlohmann::json> FileJournal::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::unique_ptr<Journal> open_journal(const std::filesystem::path& path) {
    if (path.empty()) {
        return std::make_unique<MemoryJournal>();
    }
    return std::make_unique<FileJournal>(path);
}

} // namespace vqn::service
