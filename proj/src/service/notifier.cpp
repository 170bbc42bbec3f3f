#include "vqn/service/notifier.hpp"

#include "vqn/error.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace vqn::service {

LogSink::LogSink(std::filesystem::path path) : path_(std::move(path)) {
    if (!path_.empty()) {
        if (path_.has_parent_path()) {
            std::filesystem::create_directories(path_.parent_path());
        }
        out_.open(path_, std::ios::app);
        if (!out_) {
            throw Error(ErrorCode::io_error, "cannot open notification log " + path_.string());
        }
    }
}

bool LogSink::deliver(const nlohmann::json& notification, std::string& error) {
    std::lock_guard lock(mu_);
    if (path_.empty()) {
        spdlog::info("notify {}", notification.dump());
        return true;
    }
    out_ << notification.dump() << '\n';
    out_.flush();
    if (!out_) {
        error = "write to " + path_.string() + " failed";
        return false;
    }
    return true;
}

WebhookSink::WebhookSink(std::string url, double timeout_s) : timeout_s_(timeout_s) {
    const auto scheme = url.find("://");
    const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    origin_ = slash == std::string::npos ? url : url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

bool WebhookSink::deliver(const nlohmann::json& notification, std::string& error) {
    httplib::Client client(origin_);
    const auto timeout = std::chrono::duration<double>(timeout_s_);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    const auto res = client.Post(path_, notification.dump(), "application/json");
    if (!res) {
        error = httplib::to_string(res.error());
        return false;
    }
    if (res->status < 200 || res->status >= 300) {
        error = "HTTP " + std::to_string(res->status);
        return false;
    }
    return true;
}

DeliveryRecord deliver_with_retry(NotificationSink& sink, const nlohmann::json& notification,
                                  const NotificationConfig& config, Clock& clock) {
    DeliveryRecord rec;
    double backoff = config.initial_backoff_s;
    while (rec.attempts < config.max_attempts) {
        ++rec.attempts;
        std::string error;
        if (sink.deliver(notification, error)) {
            rec.delivered = true;
            rec.last_error.clear();
            return rec;
        }
        rec.last_error = error;
        spdlog::warn("notification attempt {}/{} failed: {}", rec.attempts, config.max_attempts, error);
        if (rec.attempts < config.max_attempts) {
            clock.sleep_for(backoff);
            backoff *= 2.0;
        }
    }
    return rec;
}

std::unique_ptr<NotificationSink> make_sink(const NotificationConfig& config) {
    if (config.sink == SinkKind::webhook) {
        return std::make_unique<WebhookSink>(config.webhook_url, config.request_timeout_s);
    }
    return std::make_unique<LogSink>(config.log_path);
}

} // namespace vqn::service
