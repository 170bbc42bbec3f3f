#pragma once

#include "vqn/tagcore.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vqn {

using PairId = int;
using UserId = std::string;
/// Simulation time units or seconds, depending on the caller.
using SimTime = double;

/// Floor on QoS inside the utility so brand-new users (QoS 0) get the
/// largest finite utility instead of a division by zero.
inline constexpr double kQosFloor = 1.0;

struct RateSample {
    SimTime time = 0.0;
    double rate_hz = 0.0;
};

/// Piecewise-constant coincidence rate R_w(t).
class RateTrace {
public:
    RateTrace() = default;
    explicit RateTrace(double constant_rate_hz);

    /// Appends a sample effective from `time` on; times must not decrease.
    void set(SimTime time, double rate_hz);
    double at(SimTime time) const;
    const std::vector<RateSample>& samples() const noexcept { return samples_; }

private:
    std::vector<RateSample> samples_;
};

struct ChannelPairResource {
    PairId id = 0;
    ChannelIndex signal = 0;
    ChannelIndex idler = 0;
    RateTrace rate;
    std::optional<UserId> assignee;

    bool is_free() const noexcept { return !assignee.has_value(); }
};

enum class SessionState { waiting, served, idle, departed };

std::string_view to_string(SessionState s) noexcept;

struct AssignmentEntry {
    PairId pair = 0;
    SimTime start = 0.0;
    std::optional<SimTime> end;
    std::vector<RateSample> rates; // first sample is at `start`
};

/// Per-user QoS ledger. A session starts waiting; each request cycle is
/// waiting -> served -> idle, and idle -> waiting starts the next cycle.
/// Only waiting and served time count toward T; idle (think) time does not.
class UserSession {
public:
    UserSession(UserId user, SimTime arrival_time);

    const UserId& user() const noexcept { return user_; }
    SimTime arrival_time() const noexcept { return arrival_; }
    SessionState state() const noexcept { return state_; }
    /// Start of the current waiting period (valid while waiting).
    SimTime waiting_since() const noexcept { return phase_start_; }
    std::optional<PairId> current_pair() const;
    const std::vector<AssignmentEntry>& assignment_log() const noexcept { return log_; }

    void assign(PairId pair, SimTime t, double rate_hz);
    void update_rate(SimTime t, double rate_hz);
    void release(SimTime t);
    void request(SimTime t);
    void depart(SimTime t);

    /// Integral of the assigned pair's rate over served time up to `now`.
    double received_pairs(SimTime now) const;
    /// T: accumulated waiting plus service time up to `now`.
    double total_time(SimTime now) const;
    /// Accumulated waiting time up to `now`.
    double waiting_time(SimTime now) const;

private:
    void close_phase(SimTime t);

    UserId user_;
    SimTime arrival_;
    SessionState state_ = SessionState::waiting;
    SimTime phase_start_;
    double closed_time_ = 0.0;
    double closed_wait_ = 0.0;
    double closed_pairs_ = 0.0;
    std::vector<AssignmentEntry> log_;
};

/// received_pairs / T; zero when T is zero.
double qos(const UserSession& session, SimTime now);

/// ln(1 + rate / max(qos, kQosFloor)).
double utility(double rate_hz, double qos_value);

/// W x N utility matrix, row-major: rows are channel pairs, columns users.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<PairId> row_ids;
    std::vector<UserId> col_ids;

    static CostMatrix from_rows(const std::vector<std::vector<double>>& rows);
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

CostMatrix build_cost_matrix(std::span<const ChannelPairResource* const> free_pairs,
                             std::span<const UserSession* const> waiting, SimTime now);

struct Assignment {
    std::size_t row = 0;
    std::size_t col = 0;
    friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct MatchResult {
    std::vector<Assignment> assignments; // sorted by row
    double total = 0.0;                  // summed in row order
};

/// Maximum-total assignment of min(W, N) rows to distinct columns.
/// Rectangular inputs are padded to square with zero-valued dummies.
MatchResult hungarian_max(const CostMatrix& matrix);

enum class Policy { hungarian, fcfs };

Policy parse_policy(std::string_view name);
std::string_view to_string(Policy p) noexcept;

struct AllocationState {
    std::vector<ChannelPairResource> resources;
    std::vector<UserSession> sessions;
};

struct Decision {
    PairId pair = 0;
    UserId user;
    friend bool operator==(const Decision&, const Decision&) = default;
};

/// Matches free pairs to waiting users and applies the decisions to
/// `state`. Pairs already assigned are never touched.
std::vector<Decision> allocate(AllocationState& state, SimTime now, Policy policy);

/// Jain's index (sum x)^2 / (n sum x^2); 1 for an all-zero input.
double jain_fairness(std::span<const double> values);

} // namespace vqn
