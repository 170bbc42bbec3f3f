#include "vqn/service/event_bus.hpp"

#include "vqn/error.hpp"

#include <algorithm>

namespace vqn::service {

std::string_view to_string(Topic t) noexcept {
    return t == Topic::user_request ? "user_request" : "response";
}

Topic parse_topic(std::string_view name) {
    if (name == "user_request") {
        return Topic::user_request;
    }
    if (name == "response") {
        return Topic::response;
    }
    throw Error(ErrorCode::invalid_argument, "unknown topic '" + std::string(name) + "'");
}

BusEvent EventBus::publish(Topic topic, nlohmann::json payload) {
    BusEvent e;
    {
        std::lock_guard lock(mu_);
        auto& log = log_[topic];
        e = BusEvent{topic, log.empty() ? 1 : log.back().sequence + 1, std::move(payload)};
        log.push_back(e);
        ++generation_;
    }
    cv_.notify_all();
    return e;
}

void EventBus::restore(const BusEvent& event) {
    {
        std::lock_guard lock(mu_);
        auto& log = log_[event.topic];
        if (!log.empty() && event.sequence <= log.back().sequence) {
            throw Error(ErrorCode::invalid_argument, "restored bus events must keep increasing sequence numbers");
        }
        log.push_back(event);
        ++generation_;
    }
    cv_.notify_all();
}

bool EventBus::pending_locked(const std::string& subscriber, Topic topic) const {
    const auto it = log_.find(topic);
    if (it == log_.end() || it->second.empty()) {
        return false;
    }
    const auto c = cursors_.find({subscriber, topic});
    const std::uint64_t cursor = c == cursors_.end() ? 0 : c->second;
    return it->second.back().sequence > cursor;
}

std::vector<BusEvent> EventBus::poll(const std::string& subscriber, Topic topic, std::size_t max) const {
    std::lock_guard lock(mu_);
    std::vector<BusEvent> out;
    const auto it = log_.find(topic);
    if (it == log_.end()) {
        return out;
    }
    const auto c = cursors_.find({subscriber, topic});
    const std::uint64_t cursor = c == cursors_.end() ? 0 : c->second;
    auto first = std::upper_bound(it->second.begin(), it->second.end(), cursor,
                                  [](std::uint64_t s, const BusEvent& e) { return s < e.sequence; });
    for (; first != it->second.end() && out.size() < max; ++first) {
        out.push_back(*first);
    }
    return out;
}

bool EventBus::wait(const std::string& subscriber, Topic topic, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    const auto gen = generation_;
    cv_.wait_for(lock, timeout, [&] { return pending_locked(subscriber, topic) || generation_ != gen; });
    return pending_locked(subscriber, topic);
}

void EventBus::ack(const std::string& subscriber, Topic topic, std::uint64_t sequence) {
    std::lock_guard lock(mu_);
    auto& cursor = cursors_[{subscriber, topic}];
    cursor = std::max(cursor, sequence);
}

std::uint64_t EventBus::acked(const std::string& subscriber, Topic topic) const {
    std::lock_guard lock(mu_);
    const auto c = cursors_.find({subscriber, topic});
    return c == cursors_.end() ? 0 : c->second;
}

std::uint64_t EventBus::last_sequence(Topic topic) const {
    std::lock_guard lock(mu_);
    const auto it = log_.find(topic);
    return it == log_.end() || it->second.empty() ? 0 : it->second.back().sequence;
}

void EventBus::wake() {
    {
        std::lock_guard lock(mu_);
        ++generation_;
    }
    cv_.notify_all();
}

} // namespace vqn::service
