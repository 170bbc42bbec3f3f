#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>

namespace vqn::service {

struct BenchOptions {
    std::string url = "http://127.0.0.1:8080";
    int users = 20;
    std::string user_prefix = "bench-";
    std::string secret = "bench";
    double interarrival_ms_low = 50.0; // think time between a release and the next request
    double interarrival_ms_high = 200.0;
    double duration_s = 10.0;    // no new requests after this
    double drain_timeout_s = 60; // how long outstanding requests may take to finish
    double poll_ms = 100.0;
    double measurement_s = 0.01; // count_rate on every held pair; 0 disables
    std::uint64_t seed = 1;
};

struct BenchReport {
    std::int64_t requests = 0;  // pair requests accepted by the service
    std::int64_t completed = 0; // reached status completed
    std::int64_t lost = 0;      // accepted but never completed within the drain window
    std::int64_t failures = 0;  // HTTP or protocol errors
    std::int64_t http_calls = 0;
    std::int64_t measurements = 0;
    double p50_ms = 0.0; // submit -> completed
    double p90_ms = 0.0;
    double p99_ms = 0.0;
    double max_ms = 0.0;
    double elapsed_s = 0.0;
};

/// Concurrent synthetic clients: login, request a pair, poll until
/// completed, measure, release, think, repeat. Client i draws its think
/// times from a generator seeded with (seed, i).
BenchReport run_bench(const BenchOptions& options);

nlohmann::json to_json(const BenchReport& r);

} // namespace vqn::service
