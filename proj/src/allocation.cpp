#include "vqn/allocation.hpp"

#include "vqn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vqn {

RateTrace::RateTrace(double constant_rate_hz) { samples_.push_back({0.0, constant_rate_hz}); }

void RateTrace::set(SimTime time, double rate_hz) {
    if (!(rate_hz >= 0.0) || !std::isfinite(rate_hz)) {
        throw Error(ErrorCode::invalid_argument, "rate must be finite and non-negative");
    }
    if (!samples_.empty() && time < samples_.back().time) {
        throw Error(ErrorCode::invalid_argument, "rate samples must be appended in time order");
    }
    if (!samples_.empty() && time == samples_.back().time) {
        samples_.back().rate_hz = rate_hz;
        return;
    }
    samples_.push_back({time, rate_hz});
}

double RateTrace::at(SimTime time) const {
    if (samples_.empty()) {
        return 0.0;
    }
    auto it = std::upper_bound(samples_.begin(), samples_.end(), time,
                               [](SimTime t, const RateSample& s) { return t < s.time; });
    return it == samples_.begin() ? samples_.front().rate_hz : std::prev(it)->rate_hz;
}

std::string_view to_string(SessionState s) noexcept {
    switch (s) {
    case SessionState::waiting: return "waiting";
    case SessionState::served: return "served";
    case SessionState::idle: return "idle";
    case SessionState::departed: return "departed";
    }
    return "unknown";
}

UserSession::UserSession(UserId user, SimTime arrival_time)
    : user_(std::move(user)), arrival_(arrival_time), phase_start_(arrival_time) {}

std::optional<PairId> UserSession::current_pair() const {
    if (state_ == SessionState::served) {
        return log_.back().pair;
    }
    return std::nullopt;
}

void UserSession::close_phase(SimTime t) {
    if (t < phase_start_) {
        throw Error(ErrorCode::invalid_argument, "session time moved backwards");
    }
    closed_time_ += t - phase_start_;
    if (state_ == SessionState::waiting) {
        closed_wait_ += t - phase_start_;
    }
    phase_start_ = t;
}

void UserSession::assign(PairId pair, SimTime t, double rate_hz) {
    if (state_ != SessionState::waiting) {
        throw Error(ErrorCode::conflict, "only a waiting session can be assigned a pair");
    }
    close_phase(t);
    state_ = SessionState::served;
    log_.push_back({pair, t, std::nullopt, {{t, rate_hz}}});
}

void UserSession::update_rate(SimTime t, double rate_hz) {
    if (state_ != SessionState::served) {
        throw Error(ErrorCode::conflict, "rate updates apply only while served");
    }
    auto& rates = log_.back().rates;
    if (t < rates.back().time) {
        throw Error(ErrorCode::invalid_argument, "rate samples must be appended in time order");
    }
    rates.push_back({t, rate_hz});
}

namespace {

double integrate(const AssignmentEntry& entry, SimTime until) {
    double sum = 0.0;
    for (std::size_t k = 0; k < entry.rates.size(); ++k) {
        const SimTime from = entry.rates[k].time;
        if (from >= until) {
            break;
        }
        const SimTime to = k + 1 < entry.rates.size() ? std::min(entry.rates[k + 1].time, until) : until;
        sum += entry.rates[k].rate_hz * (to - from);
    }
    return sum;
}

} // namespace

void UserSession::release(SimTime t) {
    if (state_ != SessionState::served) {
        throw Error(ErrorCode::conflict, "only a served session can release its pair");
    }
    close_phase(t);
    auto& entry = log_.back();
    entry.end = t;
    closed_pairs_ += integrate(entry, t);
    state_ = SessionState::idle;
}

void UserSession::request(SimTime t) {
    if (state_ != SessionState::idle) {
        throw Error(ErrorCode::conflict, "a new request needs an idle session");
    }
    if (t < phase_start_) {
        throw Error(ErrorCode::invalid_argument, "session time moved backwards");
    }
    phase_start_ = t;
    state_ = SessionState::waiting;
}

void UserSession::depart(SimTime t) {
    switch (state_) {
    case SessionState::served: release(t); break;
    case SessionState::waiting: close_phase(t); break;
    case SessionState::idle: break;
    case SessionState::departed: return;
    }
    state_ = SessionState::departed;
}

double UserSession::received_pairs(SimTime now) const {
    if (state_ == SessionState::served && now > phase_start_) {
        return closed_pairs_ + integrate(log_.back(), now);
    }
    return closed_pairs_;
}

double UserSession::total_time(SimTime now) const {
    if ((state_ == SessionState::waiting || state_ == SessionState::served) && now > phase_start_) {
        return closed_time_ + (now - phase_start_);
    }
    return closed_time_;
}

double UserSession::waiting_time(SimTime now) const {
    if (state_ == SessionState::waiting && now > phase_start_) {
        return closed_wait_ + (now - phase_start_);
    }
    return closed_wait_;
}

double qos(const UserSession& session, SimTime now) {
    const double t = session.total_time(now);
    return t > 0.0 ? session.received_pairs(now) / t : 0.0;
}

double utility(double rate_hz, double qos_value) {
    return std::log1p(rate_hz / std::max(qos_value, kQosFloor));
}

CostMatrix CostMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    CostMatrix m;
    m.rows = rows.size();
    m.cols = rows.empty() ? 0 : rows.front().size();
    for (std::size_t r = 0; r < m.rows; ++r) {
        if (rows[r].size() != m.cols) {
            throw Error(ErrorCode::invalid_argument, "ragged matrix rows");
        }
        m.values.insert(m.values.end(), rows[r].begin(), rows[r].end());
        m.row_ids.push_back(static_cast<PairId>(r));
    }
    for (std::size_t c = 0; c < m.cols; ++c) {
        m.col_ids.push_back(std::to_string(c));
    }
    return m;
}

CostMatrix build_cost_matrix(std::span<const ChannelPairResource* const> free_pairs,
                             std::span<const UserSession* const> waiting, SimTime now) {
    CostMatrix m;
    m.rows = free_pairs.size();
    m.cols = waiting.size();
    m.values.resize(m.rows * m.cols);
    std::vector<double> user_qos;
    for (const auto* s : waiting) {
        user_qos.push_back(qos(*s, now));
        m.col_ids.push_back(s->user());
    }
    for (std::size_t w = 0; w < m.rows; ++w) {
        m.row_ids.push_back(free_pairs[w]->id);
        const double rate = free_pairs[w]->rate.at(now);
        for (std::size_t i = 0; i < m.cols; ++i) {
            m(w, i) = utility(rate, user_qos[i]);
        }
    }
    return m;
}

MatchResult hungarian_max(const CostMatrix& matrix) {
    if (matrix.rows == 0 || matrix.cols == 0) {
        throw Error(ErrorCode::invalid_argument, "assignment needs at least one row and one column");
    }
    if (matrix.values.size() != matrix.rows * matrix.cols) {
        throw Error(ErrorCode::invalid_argument, "matrix storage does not match its dimensions");
    }
    for (double v : matrix.values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::non_finite, "cost matrix holds a non-finite entry");
        }
    }

    // Shortest augmenting path with row/column potentials on the square,
    // zero-padded cost matrix (costs are negated values). 1-based indices;
    // slot 0 is the virtual root column.
    const std::size_t n = std::max(matrix.rows, matrix.cols);
    auto cost = [&](std::size_t r, std::size_t c) {
        return (r < matrix.rows && c < matrix.cols) ? -matrix(r, c) : 0.0;
    };
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t row = 1; row <= n; ++row) {
        match[0] = row;
        std::size_t col0 = 0;
        std::vector<double> min_slack(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[col0] = 1;
            const std::size_t r0 = match[col0];
            double delta = inf;
            std::size_t col1 = 0;
            for (std::size_t c = 1; c <= n; ++c) {
                if (used[c]) {
                    continue;
                }
                const double slack = cost(r0 - 1, c - 1) - u[r0] - v[c];
                if (slack < min_slack[c]) {
                    min_slack[c] = slack;
                    way[c] = col0;
                }
                if (min_slack[c] < delta) {
                    delta = min_slack[c];
                    col1 = c;
                }
            }
            for (std::size_t c = 0; c <= n; ++c) {
                if (used[c]) {
                    u[match[c]] += delta;
                    v[c] -= delta;
                } else {
                    min_slack[c] -= delta;
                }
            }
            col0 = col1;
        } while (match[col0] != 0);
        do {
            const std::size_t prev = way[col0];
            match[col0] = match[prev];
            col0 = prev;
        } while (col0 != 0);
    }

    MatchResult result;
    for (std::size_t c = 1; c <= n; ++c) {
        const std::size_t r = match[c] - 1;
        if (r < matrix.rows && c - 1 < matrix.cols) {
            result.assignments.push_back({r, c - 1});
        }
    }
    std::sort(result.assignments.begin(), result.assignments.end(),
              [](const Assignment& a, const Assignment& b) { return a.row < b.row; });
    for (const auto& a : result.assignments) {
        result.total += matrix(a.row, a.col);
    }
    return result;
}

Policy parse_policy(std::string_view name) {
    if (name == "hungarian") {
        return Policy::hungarian;
    }
    if (name == "fcfs") {
        return Policy::fcfs;
    }
    throw Error(ErrorCode::config_error, "unknown policy '" + std::string(name) + "'", "policy");
}

std::string_view to_string(Policy p) noexcept { return p == Policy::hungarian ? "hungarian" : "fcfs"; }

std::vector<Decision> allocate(AllocationState& state, SimTime now, Policy policy) {
    std::vector<ChannelPairResource*> free_pairs;
    for (auto& r : state.resources) {
        if (r.is_free()) {
            free_pairs.push_back(&r);
        }
    }
    std::vector<UserSession*> waiting;
    for (auto& s : state.sessions) {
        if (s.state() == SessionState::waiting) {
            waiting.push_back(&s);
        }
    }
    if (free_pairs.empty() || waiting.empty()) {
        return {};
    }
    std::sort(free_pairs.begin(), free_pairs.end(), [](auto* a, auto* b) { return a->id < b->id; });
    std::stable_sort(waiting.begin(), waiting.end(), [](auto* a, auto* b) {
        if (a->waiting_since() != b->waiting_since()) {
            return a->waiting_since() < b->waiting_since();
        }
        return a->user() < b->user();
    });

    std::vector<std::pair<ChannelPairResource*, UserSession*>> chosen;
    if (policy == Policy::fcfs) {
        const std::size_t k = std::min(free_pairs.size(), waiting.size());
        for (std::size_t i = 0; i < k; ++i) {
            chosen.emplace_back(free_pairs[i], waiting[i]);
        }
    } else {
        std::vector<const ChannelPairResource*> rows(free_pairs.begin(), free_pairs.end());
        std::vector<const UserSession*> cols(waiting.begin(), waiting.end());
        const auto match = hungarian_max(build_cost_matrix(rows, cols, now));
        for (const auto& a : match.assignments) {
            chosen.emplace_back(free_pairs[a.row], waiting[a.col]);
        }
    }

    std::vector<Decision> decisions;
    for (auto [pair, session] : chosen) {
        pair->assignee = session->user();
        session->assign(pair->id, now, pair->rate.at(now));
        decisions.push_back({pair->id, session->user()});
    }
    return decisions;
}

double jain_fairness(std::span<const double> values) {
    if (values.empty()) {
        throw Error(ErrorCode::invalid_argument, "fairness of an empty population is undefined");
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double x : values) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw Error(ErrorCode::invalid_argument, "fairness inputs must be finite and non-negative");
        }
        sum += x;
        sum_sq += x * x;
    }
    if (sum_sq == 0.0) {
        return 1.0;
    }
    return sum * sum / (static_cast<double>(values.size()) * sum_sq);
}

} // namespace vqn
