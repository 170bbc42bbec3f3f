#include "vqn/service/config.hpp"

#include "vqn/error.hpp"

#include <cstdlib>
#include <fstream>

namespace vqn::service {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& message) {
    throw Error(ErrorCode::config_error, message, field);
}

BackendKind parse_backend(const std::string& s) {
    if (s == "virtual") {
        return BackendKind::virtual_source;
    }
    if (s == "stub") {
        return BackendKind::stub;
    }
    bad("backend", "backend must be 'virtual' or 'stub'");
}

SinkKind parse_sink(const std::string& s) {
    if (s == "log") {
        return SinkKind::log;
    }
    if (s == "webhook") {
        return SinkKind::webhook;
    }
    bad("notification.sink", "notification sink must be 'log' or 'webhook'");
}

double parse_number(const std::string& field, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) {
            bad(field, "not a number: '" + text + "'");
        }
        return v;
    } catch (const std::logic_error&) {
        bad(field, "not a number: '" + text + "'");
    }
}

} // namespace

void ServiceConfig::validate() const {
    if (port < 0 || port > 65535) {
        bad("port", "port must be in 0..65535");
    }
    if (users.empty()) {
        bad("users", "at least one user must be provisioned");
    }
    if (!(token_ttl_s > 0.0)) {
        bad("token_ttl_s", "token_ttl_s must be positive");
    }
    if (!(measurement_cap_s > 0.0)) {
        bad("measurement_cap_s", "measurement_cap_s must be positive");
    }
    if (!(default_measurement_s > 0.0) || default_measurement_s > measurement_cap_s) {
        bad("default_measurement_s", "default_measurement_s must be positive and within the cap");
    }
    if (notification.sink == SinkKind::webhook && notification.webhook_url.empty()) {
        bad("notification.webhook_url", "webhook sink needs a url");
    }
    if (notification.max_attempts < 1) {
        bad("notification.max_attempts", "max_attempts must be at least 1");
    }
    try {
        source.validate();
    } catch (const Error& e) {
        bad("source", e.what());
    }
}

ServiceConfig parse_service_config(const nlohmann::json& j) {
    ServiceConfig c;
    try {
        c.listen_address = j.value("listen_address", c.listen_address);
        c.port = j.value("port", c.port);
        if (j.contains("users")) {
            c.users = j.at("users").get<std::map<std::string, std::string>>();
        }
        if (j.contains("bench_users")) {
            const auto& b = j.at("bench_users");
            const int count = b.value("count", 0);
            const std::string secret = b.value("secret", std::string("bench"));
            for (int i = 0; i < count; ++i) {
                c.users.emplace("bench-" + std::to_string(i), secret);
            }
        }
        if (j.contains("policy")) {
            c.policy = parse_policy(j.at("policy").get<std::string>());
        }
        if (j.contains("backend")) {
            c.backend = parse_backend(j.at("backend").get<std::string>());
        }
        if (j.contains("notification")) {
            const auto& n = j.at("notification");
            if (n.contains("sink")) {
                c.notification.sink = parse_sink(n.at("sink").get<std::string>());
            }
            c.notification.webhook_url = n.value("webhook_url", c.notification.webhook_url);
            c.notification.log_path = n.value("log_path", std::string());
            c.notification.max_attempts = n.value("max_attempts", c.notification.max_attempts);
            c.notification.initial_backoff_s = n.value("initial_backoff_s", c.notification.initial_backoff_s);
            c.notification.request_timeout_s = n.value("request_timeout_s", c.notification.request_timeout_s);
        }
        c.store_path = j.value("store_path", std::string());
        c.token_ttl_s = j.value("token_ttl_s", c.token_ttl_s);
        c.measurement_cap_s = j.value("measurement_cap_s", c.measurement_cap_s);
        c.default_measurement_s = j.value("default_measurement_s", c.default_measurement_s);
        if (j.contains("source")) {
            const auto& s = j.at("source");
            if (s.is_string()) {
                if (s.get<std::string>() != "testbed") {
                    bad("source", "unknown source preset '" + s.get<std::string>() + "'");
                }
            } else {
                c.source = s.get<SourceConfig>();
            }
        }
        c.source.seed = j.value("seed", c.source.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::config_error, std::string("invalid service config: ") + e.what());
    }
    c.validate();
    return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io_error, "cannot open config " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::config_error, "config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_service_config(j);
}

void apply_env_overrides(ServiceConfig& c, const EnvLookup& env) {
    if (auto v = env("VQN_LISTEN_ADDRESS")) {
        c.listen_address = *v;
    }
    if (auto v = env("VQN_PORT")) {
        c.port = static_cast<int>(parse_number("port", *v));
    }
    if (auto v = env("VQN_POLICY")) {
        c.policy = parse_policy(*v);
    }
    if (auto v = env("VQN_BACKEND")) {
        c.backend = parse_backend(*v);
    }
    if (auto v = env("VQN_STORE_PATH")) {
        c.store_path = *v;
    }
    if (auto v = env("VQN_NOTIFY_SINK")) {
        c.notification.sink = parse_sink(*v);
    }
    if (auto v = env("VQN_WEBHOOK_URL")) {
        c.notification.webhook_url = *v;
    }
    if (auto v = env("VQN_NOTIFY_LOG")) {
        c.notification.log_path = *v;
    }
    if (auto v = env("VQN_TOKEN_TTL_S")) {
        c.token_ttl_s = parse_number("token_ttl_s", *v);
    }
    if (auto v = env("VQN_MEASUREMENT_CAP_S")) {
        c.measurement_cap_s = parse_number("measurement_cap_s", *v);
    }
    if (auto v = env("VQN_SEED")) {
        c.source.seed = static_cast<std::uint64_t>(parse_number("seed", *v));
    }
    c.validate();
}

void apply_env_overrides(ServiceConfig& c) {
    apply_env_overrides(c, [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) {
            return std::string(v);
        }
        return std::nullopt;
    });
}

} // namespace vqn::service
