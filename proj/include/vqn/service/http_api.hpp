#pragma once

#include "vqn/error.hpp"
#include "vqn/service/service.hpp"

#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace vqn::service {

int http_status(ErrorCode code) noexcept;

/// JSON-over-HTTP front end for a Service. Paths live under /api/v1.
class HttpServer {
public:
    explicit HttpServer(Service& service, int worker_threads = 64);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the listening socket; port 0 picks a free port. Returns the port.
    int bind(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    void listen();
    /// Serves on a background thread.
    void start();
    void stop();

private:
    void routes();

    Service& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

} // namespace vqn::service
