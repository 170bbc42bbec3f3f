#include "vqn/service/http_api.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace vqn::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message, const std::string& field = {}) {
    json body{{"code", to_string(code)}, {"message", message}};
    if (!field.empty()) {
        body["field"] = field;
    }
    send_json(res, http_status(code), body);
}

std::string bearer(const httplib::Request& req) {
    const auto h = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (h.size() > prefix.size() && h.compare(0, prefix.size(), prefix) == 0) {
        return h.substr(prefix.size());
    }
    return {};
}

json body_of(const httplib::Request& req) {
    if (req.body.empty()) {
        return json::object();
    }
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) {
            throw Error(ErrorCode::validation, "request body must be a JSON object", "body");
        }
        return j;
    } catch (const json::parse_error&) {
        throw Error(ErrorCode::validation, "request body is not valid JSON", "body");
    }
}

template <typename T>
T field_of(const json& body, const char* name) {
    if (!body.contains(name)) {
        throw Error(ErrorCode::validation, std::string(name) + " is required", name);
    }
    try {
        return body.at(name).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::validation, std::string(name) + " has the wrong type", name);
    }
}

PairId pair_from_path(const std::string& text) {
    try {
        std::size_t used = 0;
        const int id = std::stoi(text, &used);
        if (used == text.size()) {
            return id;
        }
    } catch (const std::logic_error&) {
    }
    throw Error(ErrorCode::validation, "pair id must be an integer", "pair_id");
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
        try {
            h(req, res);
        } catch (const Error& e) {
            send_error(res, e.code(), e.what(), e.field());
        } catch (const std::exception& e) {
            spdlog::error("{} {}: {}", req.method, req.path, e.what());
            send_json(res, 500, {{"code", "internal"}, {"message", e.what()}});
        }
    };
}

} // namespace

int http_status(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::unauthorized:
        return 401;
    case ErrorCode::forbidden:
        return 403;
    case ErrorCode::not_found:
        return 404;
    case ErrorCode::conflict:
        return 409;
    case ErrorCode::unavailable:
        return 503;
    case ErrorCode::validation:
    case ErrorCode::invalid_argument:
    case ErrorCode::config_error:
    case ErrorCode::invalid_channel:
    case ErrorCode::unsupported_channel:
    case ErrorCode::unknown_channel:
        return 400;
    case ErrorCode::no_peak:
    case ErrorCode::undefined_car:
    case ErrorCode::non_finite:
        return 422;
    default:
        return 500;
    }
}

HttpServer::HttpServer(Service& service, int worker_threads)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
    const auto n = static_cast<std::size_t>(std::max(1, worker_threads));
    server_->new_task_queue = [n] { return new httplib::ThreadPool(n); };
    server_->set_keep_alive_max_count(1'000'000);
    server_->set_keep_alive_timeout(10);
    routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::routes() {
    auto& s = *server_;

    s.Get("/api/v1/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
              send_json(res, 200, {{"status", "ok"}});
          }));

    s.Post("/api/v1/auth/login", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto body = body_of(req);
               const auto r = service_.login(field_of<std::string>(body, "user"), field_of<std::string>(body, "secret"));
               send_json(res, 200, {{"token", r.token}, {"expires_at", r.expires_at}});
           }));

    s.Post("/api/v1/pair-requests", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto token = bearer(req);
               const auto r = service_.submit_pair_request(token);
               const auto q = service_.queue_position(token);
               send_json(res, 202,
                         {{"request_id", r.id},
                          {"status", to_string(r.status)},
                          {"queue_position", q.position ? json(*q.position) : json(nullptr)}});
           }));

    s.Get(R"(/api/v1/pair-requests/([A-Za-z0-9_-]+))",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, to_json(service_.request_status(bearer(req), req.matches[1].str())));
          }));

    s.Get("/api/v1/queue/position", guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, to_json(service_.queue_position(bearer(req))));
          }));

    s.Get("/api/v1/resources", guarded([this](const httplib::Request& req, httplib::Response& res) {
              json list = json::array();
              for (const auto& r : service_.list_resources(bearer(req))) {
                  list.push_back(to_json(r));
              }
              send_json(res, 200, {{"resources", list}});
          }));

    s.Post("/api/v1/measurements", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto token = bearer(req);
               service_.authenticate(token);
               const auto body = body_of(req);
               const auto pair = field_of<PairId>(body, "pair_id");
               const auto function = field_of<std::string>(body, "function");
               const json params = body.contains("params") ? body.at("params") : json::object();
               send_json(res, 200, service_.run_measurement(token, pair, function, params));
           }));

    s.Post(R"(/api/v1/pairs/([^/]+)/release)", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto r = service_.release_pair(bearer(req), pair_from_path(req.matches[1].str()));
               send_json(res, 200,
                         {{"pair_id", r.pair_id},
                          {"released", r.released},
                          {"request_id", r.request_id ? json(*r.request_id) : json(nullptr)},
                          {"status", "completed"}});
           }));

    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            json body{{"code", res.status == 404 ? "not_found" : "http_error"},
                      {"message", res.status == 404 ? "no such endpoint" : "request failed"}};
            res.set_content(body.dump(), "application/json");
        }
    });
}

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound < 0) {
            throw Error(ErrorCode::unavailable, "cannot bind " + host);
        }
        return bound;
    }
    if (!server_->bind_to_port(host, port)) {
        throw Error(ErrorCode::unavailable, "cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::start() {
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void HttpServer::stop() {
    if (server_) {
        server_->stop();
    }
    if (thread_.joinable()) {
        thread_.join();
    }
}

} // namespace vqn::service
