#pragma once

#include "vqn/service/clock.hpp"
#include "vqn/service/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>

namespace vqn::service {

class NotificationSink {
public:
    virtual ~NotificationSink() = default;
    /// True on confirmed delivery. Must not throw for delivery failures.
    virtual bool deliver(const nlohmann::json& notification, std::string& error) = 0;
};

/// Appends one JSON line per notification; always confirms.
class LogSink final : public NotificationSink {
public:
    explicit LogSink(std::filesystem::path path = {});
    bool deliver(const nlohmann::json& notification, std::string& error) override;

private:
    std::mutex mu_;
    std::filesystem::path path_;
    std::ofstream out_;
};

/// POSTs the notification as JSON; any 2xx confirms delivery.
class WebhookSink final : public NotificationSink {
public:
    WebhookSink(std::string url, double timeout_s);
    bool deliver(const nlohmann::json& notification, std::string& error) override;

private:
    std::string origin_;
    std::string path_;
    double timeout_s_;
};

struct DeliveryRecord {
    bool delivered = false;
    int attempts = 0;
    std::string last_error;
};

/// Up to `max_attempts` tries, sleeping initial_backoff * 2^k between them.
DeliveryRecord deliver_with_retry(NotificationSink& sink, const nlohmann::json& notification,
                                  const NotificationConfig& config, Clock& clock);

std::unique_ptr<NotificationSink> make_sink(const NotificationConfig& config);

} // namespace vqn::service
