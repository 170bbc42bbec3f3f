#pragma once

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vqn::service {

enum class Topic { user_request, response };

std::string_view to_string(Topic t) noexcept;
Topic parse_topic(std::string_view name);

struct BusEvent {
    Topic topic = Topic::user_request;
    std::uint64_t sequence = 0; // per topic, starts at 1
    nlohmann::json payload;
};

/// In-process pub/sub. Events stay in the topic log; each subscriber has
/// a cursor that only moves on ack, so anything polled but not acked is
/// delivered again (at-least-once).
class EventBus {
public:
    /// Assigns the next sequence number for the topic.
    BusEvent publish(Topic topic, nlohmann::json payload);
    /// Re-inserts an event with its original sequence (journal replay).
    void restore(const BusEvent& event);

    /// Events after the subscriber's acked cursor, oldest first.
    std::vector<BusEvent> poll(const std::string& subscriber, Topic topic, std::size_t max = 64) const;
    /// Blocks until there is something to poll, `timeout` passes, or wake().
    bool wait(const std::string& subscriber, Topic topic, std::chrono::milliseconds timeout) const;
    void ack(const std::string& subscriber, Topic topic, std::uint64_t sequence);
    std::uint64_t acked(const std::string& subscriber, Topic topic) const;
    std::uint64_t last_sequence(Topic topic) const;
    void wake();

private:
    bool pending_locked(const std::string& subscriber, Topic topic) const;

    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::map<Topic, std::vector<BusEvent>> log_;
    std::map<std::pair<std::string, Topic>, std::uint64_t> cursors_;
    std::uint64_t generation_ = 0;
};

} // namespace vqn::service
