#pragma once

#include "vqn/allocation.hpp"

#include <json.hpp>

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace vqn::sim {

/// closed: a fixed population; each user thinks for an exponential time
/// (mean_interarrival), requests, is served, and thinks again.
/// open: Poisson arrivals of fresh users who leave after one service.
enum class ArrivalModel { closed, open };

struct SimConfig {
    int n_resources = 6;
    int n_users = 10; // closed population size
    double mean_interarrival = 10.0;
    double mean_service = 60.0;
    double duration = 1000.0;
    double rate_low_hz = 18000.0;
    double rate_high_hz = 68000.0;
    int repetitions = 3;
    Policy policy = Policy::hungarian;
    std::uint64_t seed = 1;
    ArrivalModel arrival_model = ArrivalModel::closed;

    void validate() const;
};

struct TimePoint {
    double time = 0.0;
    std::int64_t value = 0;
    friend bool operator==(const TimePoint&, const TimePoint&) = default;
};

struct AssignmentEvent {
    double time = 0.0;
    PairId pair = 0;
    UserId user;
    friend bool operator==(const AssignmentEvent&, const AssignmentEvent&) = default;
};

/// One repetition.
struct SimMetrics {
    double avg_wait = 0.0;
    double avg_qos = 0.0;
    double fairness = 1.0;
    double avg_queue_length = 0.0; // time average over the horizon
    std::int64_t throughput = 0;   // completed services
    std::vector<TimePoint> queue_length_series;
    std::vector<TimePoint> cumulative_throughput_series;
    std::vector<double> per_user_qos;
    std::vector<double> resource_rates;
    std::vector<AssignmentEvent> assignments;

    // bookkeeping at the horizon
    std::int64_t arrivals = 0;
    std::int64_t in_service = 0;
    std::int64_t queued = 0;
};

struct SimSummary {
    double avg_wait = 0.0;
    double avg_qos = 0.0;
    double fairness = 0.0;
    double avg_queue_length = 0.0;
    double throughput = 0.0;
};

struct SimReport {
    SimConfig config;
    SimSummary mean; // averaged across repetitions
    std::vector<SimMetrics> repetitions;
};

/// One repetition, seeded directly.
SimMetrics run_once(const SimConfig& config, std::uint64_t seed);

/// All repetitions with derived sub-seeds, averaged. Repetitions run in
/// parallel; the result does not depend on the thread count.
SimReport run(const SimConfig& config);

struct SweepRow {
    int users = 0;
    int resources = 0;
    SimSummary metrics;
};

std::vector<SweepRow> sweep_users(const SimConfig& base, const std::vector<int>& user_counts);
std::vector<SweepRow> sweep_resources(const SimConfig& base, const std::vector<int>& resource_counts);

struct PolicyComparison {
    SimReport hungarian;
    SimReport fcfs;
};

/// Both policies see identical arrival, service and rate draws.
PolicyComparison compare_policies(const SimConfig& config);

struct Preset {
    std::string name;
    SimConfig config;
    std::vector<int> sweep; // user counts (fig5) or resource counts (fig6)
};

Preset preset(const std::string& name);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
nlohmann::json to_json(const SimMetrics& m);
nlohmann::json to_json(const SimReport& r);

void from_json(const nlohmann::json& j, SimConfig& c);

} // namespace vqn::sim
