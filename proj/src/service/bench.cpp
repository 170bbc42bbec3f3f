#include "vqn/service/bench.hpp"

#include "vqn/error.hpp"
#include "vqn/random.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace vqn::service {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct ClientStats {
    std::int64_t requests = 0;
    std::int64_t completed = 0;
    std::int64_t lost = 0;
    std::int64_t failures = 0;
    std::int64_t http_calls = 0;
    std::int64_t measurements = 0;
    std::vector<double> latencies_ms;
};

class BenchClient {
public:
    BenchClient(const BenchOptions& o, int index, Clock::time_point deadline, Clock::time_point drain_deadline)
        : o_(o), user_(o.user_prefix + std::to_string(index)), client_(o.url),
          rng_(derive_seed(o.seed, static_cast<std::uint64_t>(index))), deadline_(deadline),
          drain_deadline_(drain_deadline) {
        client_.set_keep_alive(true);
        client_.set_connection_timeout(std::chrono::seconds(5));
        client_.set_read_timeout(std::chrono::seconds(30));
    }

    ClientStats run() {
        if (!login()) {
            return stats_;
        }
        std::uniform_real_distribution<double> think(o_.interarrival_ms_low, o_.interarrival_ms_high);
        // stagger the first request
        sleep_ms(think(rng_));
        while (Clock::now() < deadline_) {
            cycle(think(rng_));
            sleep_ms(think(rng_));
        }
        return stats_;
    }

private:
    std::optional<json> call(const std::string& method, const std::string& path, const json& body, int expect) {
        ++stats_.http_calls;
        const httplib::Headers headers{{"Authorization", "Bearer " + token_}};
        httplib::Result res = method == "GET" ? client_.Get(path, headers)
                                              : client_.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            ++stats_.failures;
            spdlog::warn("{}: {} {} failed: {}", user_, method, path, httplib::to_string(res.error()));
            return std::nullopt;
        }
        if (res->status != expect) {
            ++stats_.failures;
            spdlog::warn("{}: {} {} -> {} {}", user_, method, path, res->status, res->body);
            return std::nullopt;
        }
        try {
            return json::parse(res->body);
        } catch (const json::parse_error&) {
            ++stats_.failures;
            return std::nullopt;
        }
    }

    bool login() {
        const auto r = call("POST", "/api/v1/auth/login", {{"user", user_}, {"secret", o_.secret}}, 200);
        if (!r) {
            return false;
        }
        token_ = r->at("token").get<std::string>();
        return true;
    }

    void cycle(double hold_ms) {
        const auto t0 = Clock::now();
        const auto submitted = call("POST", "/api/v1/pair-requests", json::object(), 202);
        if (!submitted) {
            return;
        }
        ++stats_.requests;
        const auto id = submitted->at("request_id").get<std::string>();
        std::optional<json> record;
        while (Clock::now() < drain_deadline_) {
            record = call("GET", "/api/v1/pair-requests/" + id, json::object(), 200);
            if (record && record->at("status") == "completed") {
                break;
            }
            record.reset();
            sleep_ms(o_.poll_ms);
        }
        if (!record) {
            ++stats_.lost;
            return;
        }
        ++stats_.completed;
        stats_.latencies_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
        const auto pair = record->at("pair_id").get<int>();
        if (o_.measurement_s > 0.0) {
            if (call("POST", "/api/v1/measurements",
                     {{"pair_id", pair}, {"function", "count_rate"}, {"params", {{"duration_s", o_.measurement_s}}}},
                     200)) {
                ++stats_.measurements;
            }
        }
        sleep_ms(hold_ms);
        call("POST", "/api/v1/pairs/" + std::to_string(pair) + "/release", json::object(), 200);
    }

    static void sleep_ms(double ms) { std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms)); }

    const BenchOptions& o_;
    std::string user_;
    httplib::Client client_;
    std::mt19937_64 rng_;
    Clock::time_point deadline_;
    Clock::time_point drain_deadline_;
    std::string token_;
    ClientStats stats_;
};

double percentile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) {
        return 0.0;
    }
    const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size()))) - 1;
    return sorted[std::min(k, sorted.size() - 1)];
}

} // namespace

BenchReport run_bench(const BenchOptions& o) {
    if (o.users < 1) {
        throw Error(ErrorCode::invalid_argument, "bench needs at least one user", "users");
    }
    if (!(o.interarrival_ms_low >= 0.0) || o.interarrival_ms_high < o.interarrival_ms_low) {
        throw Error(ErrorCode::invalid_argument, "interarrival range must satisfy 0 <= low <= high", "interarrival-ms");
    }
    const auto start = Clock::now();
    const auto deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(o.duration_s));
    const auto drain = deadline + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(o.drain_timeout_s));

    std::vector<ClientStats> stats(static_cast<std::size_t>(o.users));
    std::vector<std::thread> threads;
    threads.reserve(stats.size());
    for (int i = 0; i < o.users; ++i) {
        threads.emplace_back([&, i] { stats[static_cast<std::size_t>(i)] = BenchClient(o, i, deadline, drain).run(); });
    }
    for (auto& t : threads) {
        t.join();
    }

    BenchReport r;
    std::vector<double> lat;
    for (const auto& s : stats) {
        r.requests += s.requests;
        r.completed += s.completed;
        r.lost += s.lost;
        r.failures += s.failures;
        r.http_calls += s.http_calls;
        r.measurements += s.measurements;
        lat.insert(lat.end(), s.latencies_ms.begin(), s.latencies_ms.end());
    }
    std::sort(lat.begin(), lat.end());
    r.p50_ms = percentile(lat, 0.50);
    r.p90_ms = percentile(lat, 0.90);
    r.p99_ms = percentile(lat, 0.99);
    r.max_ms = lat.empty() ? 0.0 : lat.back();
    r.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();
    return r;
}

json to_json(const BenchReport& r) {
    return {{"requests", r.requests},
            {"completed", r.completed},
            {"lost", r.lost},
            {"failures", r.failures},
            {"http_calls", r.http_calls},
            {"measurements", r.measurements},
            {"latency_ms", {{"p50", r.p50_ms}, {"p90", r.p90_ms}, {"p99", r.p99_ms}, {"max", r.max_ms}}},
            {"elapsed_s", r.elapsed_s}};
}

} // namespace vqn::service
