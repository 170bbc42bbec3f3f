#pragma once

#include "vqn/allocation.hpp"
#include "vqn/photon_source.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace vqn::service {

enum class BackendKind { virtual_source, stub };
enum class SinkKind { log, webhook };

struct NotificationConfig {
    SinkKind sink = SinkKind::log;
    std::string webhook_url;         // http://host:port/path
    std::filesystem::path log_path;  // empty: log through spdlog only
    int max_attempts = 5;
    double initial_backoff_s = 0.2;
    double request_timeout_s = 2.0;
};

struct ServiceConfig {
    std::string listen_address = "127.0.0.1";
    int port = 8080;
    std::map<std::string, std::string> users; // user -> secret
    Policy policy = Policy::fcfs;
    BackendKind backend = BackendKind::virtual_source;
    NotificationConfig notification;
    std::filesystem::path store_path; // empty: in-memory journal
    double token_ttl_s = 3600.0;
    double measurement_cap_s = 120.0;
    double default_measurement_s = 1.0;
    /// Channel pairs offered for allocation and driven by the virtual backend.
    SourceConfig source = testbed_preset(1.0, 1);

    void validate() const;
};

/// Parses a config document. "bench_users": {"count": N, "secret": S}
/// provisions users bench-0 .. bench-(N-1) sharing one secret.
ServiceConfig parse_service_config(const nlohmann::json& j);
ServiceConfig load_service_config(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Overrides from VQN_LISTEN_ADDRESS, VQN_PORT, VQN_POLICY, VQN_BACKEND,
/// VQN_STORE_PATH, VQN_NOTIFY_SINK, VQN_WEBHOOK_URL, VQN_NOTIFY_LOG,
/// VQN_TOKEN_TTL_S, VQN_MEASUREMENT_CAP_S and VQN_SEED.
void apply_env_overrides(ServiceConfig& config, const EnvLookup& lookup);
void apply_env_overrides(ServiceConfig& config);

} // namespace vqn::service
