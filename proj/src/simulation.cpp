#include "vqn/simulation.hpp"

#include "vqn/error.hpp"
#include "vqn/random.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <queue>
#include <random>

namespace vqn::sim {

namespace {

enum class EventKind { arrival, completion };

struct Event {
    double time;
    std::uint64_t seq; // FIFO among simultaneous events
    EventKind kind;
    std::size_t user;

    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

double draw_exp(std::mt19937_64& rng, double mean) {
    return std::exponential_distribution<double>(1.0 / mean)(rng);
}

// Per-user generator so every policy sees the same k-th think and service
// time for each user (common random numbers).
struct UserStreams {
    std::mt19937_64 think;
    std::mt19937_64 service;
};

class Simulator {
public:
    Simulator(const SimConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
        std::mt19937_64 rate_rng(derive_seed(seed, 0));
        std::uniform_real_distribution<double> rate(config.rate_low_hz, config.rate_high_hz);
        for (int w = 0; w < config.n_resources; ++w) {
            const double r = config.rate_low_hz == config.rate_high_hz ? config.rate_low_hz : rate(rate_rng);
            state_.resources.push_back({w, 0, 0, RateTrace(r), std::nullopt});
            metrics_.resource_rates.push_back(r);
        }
        arrival_rng_.seed(derive_seed(seed, 1));
    }

    SimMetrics run() {
        const bool arrivals_possible = std::isfinite(config_.mean_interarrival);
        if (arrivals_possible) {
            if (config_.arrival_model == ArrivalModel::closed) {
                for (int i = 0; i < config_.n_users; ++i) {
                    const auto u = add_user();
                    push(draw_exp(streams_[u].think, config_.mean_interarrival), EventKind::arrival, u);
                }
            } else {
                schedule_open_arrival(0.0);
            }
        }
        record_queue(0.0);

        while (!events_.empty() && events_.top().time <= config_.duration) {
            const Event e = events_.top();
            events_.pop();
            advance(e.time);
            if (e.kind == EventKind::arrival) {
                on_arrival(e);
            } else {
                on_completion(e);
            }
            dispatch(e.time);
            record_queue(e.time);
        }
        advance(config_.duration);
        return finish();
    }

private:
    std::size_t add_user() {
        const auto index = streams_.size();
        streams_.push_back({std::mt19937_64(derive_seed(seed_, 1000 + 2 * index)),
                            std::mt19937_64(derive_seed(seed_, 1001 + 2 * index))});
        session_of_.push_back(std::nullopt);
        return index;
    }

    void push(double time, EventKind kind, std::size_t user) { events_.push({time, next_seq_++, kind, user}); }

    void schedule_open_arrival(double now) {
        push(now + draw_exp(arrival_rng_, config_.mean_interarrival), EventKind::arrival, add_user());
    }

    static UserId user_name(std::size_t u) { return "u" + std::to_string(u); }

    void on_arrival(const Event& e) {
        ++metrics_.arrivals;
        auto& slot = session_of_[e.user];
        if (!slot) {
            slot = state_.sessions.size();
            state_.sessions.emplace_back(user_name(e.user), e.time);
        } else {
            state_.sessions[*slot].request(e.time);
        }
        request_time_[e.user] = e.time;
        if (config_.arrival_model == ArrivalModel::open) {
            schedule_open_arrival(e.time);
        }
    }

    void on_completion(const Event& e) {
        auto& session = state_.sessions[*session_of_[e.user]];
        const auto pair = session.current_pair();
        state_.resources[static_cast<std::size_t>(*pair)].assignee.reset();
        if (config_.arrival_model == ArrivalModel::closed) {
            session.release(e.time);
            push(e.time + draw_exp(streams_[e.user].think, config_.mean_interarrival), EventKind::arrival, e.user);
        } else {
            session.depart(e.time);
        }
        ++metrics_.throughput;
        metrics_.cumulative_throughput_series.push_back({e.time, metrics_.throughput});
    }

    void dispatch(double now) {
        for (const auto& d : allocate(state_, now, config_.policy)) {
            const auto u = static_cast<std::size_t>(std::stoul(d.user.substr(1)));
            waits_.push_back(now - request_time_[u]);
            metrics_.assignments.push_back({now, d.pair, d.user});
            push(now + draw_exp(streams_[u].service, config_.mean_service), EventKind::completion, u);
        }
    }

    std::int64_t queue_length() const {
        return std::count_if(state_.sessions.begin(), state_.sessions.end(),
                             [](const UserSession& s) { return s.state() == SessionState::waiting; });
    }

    void record_queue(double now) {
        const auto q = queue_length();
        if (metrics_.queue_length_series.empty() || metrics_.queue_length_series.back().value != q) {
            metrics_.queue_length_series.push_back({now, q});
        }
        current_queue_ = q;
    }

    void advance(double t) {
        queue_area_ += static_cast<double>(current_queue_) * (t - clock_);
        clock_ = t;
    }

    SimMetrics finish() {
        const double horizon = config_.duration;
        for (const auto& s : state_.sessions) {
            if (s.total_time(horizon) > 0.0) {
                metrics_.per_user_qos.push_back(qos(s, horizon));
            }
            if (s.state() == SessionState::waiting) {
                ++metrics_.queued;
            } else if (s.state() == SessionState::served) {
                ++metrics_.in_service;
            }
        }
        if (!waits_.empty()) {
            double sum = 0.0;
            for (double w : waits_) {
                sum += w;
            }
            metrics_.avg_wait = sum / static_cast<double>(waits_.size());
        }
        if (!metrics_.per_user_qos.empty()) {
            double sum = 0.0;
            for (double q : metrics_.per_user_qos) {
                sum += q;
            }
            metrics_.avg_qos = sum / static_cast<double>(metrics_.per_user_qos.size());
            metrics_.fairness = jain_fairness(metrics_.per_user_qos);
        }
        metrics_.avg_queue_length = horizon > 0.0 ? queue_area_ / horizon : 0.0;
        return std::move(metrics_);
    }

    const SimConfig& config_;
    std::uint64_t seed_;
    AllocationState state_;
    SimMetrics metrics_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t next_seq_ = 0;
    std::mt19937_64 arrival_rng_;
    std::vector<UserStreams> streams_;
    std::vector<std::optional<std::size_t>> session_of_;
    std::map<std::size_t, double> request_time_;
    std::vector<double> waits_;
    std::int64_t current_queue_ = 0;
    double clock_ = 0.0;
    double queue_area_ = 0.0;
};

SimSummary average(const std::vector<SimMetrics>& reps) {
    SimSummary s;
    if (reps.empty()) {
        return s;
    }
    for (const auto& m : reps) {
        s.avg_wait += m.avg_wait;
        s.avg_qos += m.avg_qos;
        s.fairness += m.fairness;
        s.avg_queue_length += m.avg_queue_length;
        s.throughput += static_cast<double>(m.throughput);
    }
    const auto n = static_cast<double>(reps.size());
    s.avg_wait /= n;
    s.avg_qos /= n;
    s.fairness /= n;
    s.avg_queue_length /= n;
    s.throughput /= n;
    return s;
}

void require(bool ok, const std::string& message, const std::string& field) {
    if (!ok) {
        throw Error(ErrorCode::config_error, message, field);
    }
}

} // namespace

void SimConfig::validate() const {
    require(n_resources > 0, "n_resources must be positive", "n_resources");
    require(n_users >= 0, "n_users must be non-negative", "n_users");
    require(mean_interarrival > 0.0, "mean_interarrival must be positive", "mean_interarrival");
    require(std::isfinite(mean_service) && mean_service > 0.0, "mean_service must be positive", "mean_service");
    require(std::isfinite(duration) && duration > 0.0, "duration must be positive", "duration");
    require(rate_low_hz > 0.0 && rate_low_hz <= rate_high_hz, "rate range must satisfy 0 < low <= high",
            "rate_range_hz");
    require(repetitions > 0, "repetitions must be positive", "repetitions");
}

SimMetrics run_once(const SimConfig& config, std::uint64_t seed) {
    config.validate();
    return Simulator(config, seed).run();
}

SimReport run(const SimConfig& config) {
    config.validate();
    SimReport report{config, {}, std::vector<SimMetrics>(static_cast<std::size_t>(config.repetitions))};
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < config.repetitions; ++r) {
        report.repetitions[static_cast<std::size_t>(r)] =
            Simulator(config, derive_seed(config.seed, static_cast<std::uint64_t>(r))).run();
    }
    report.mean = average(report.repetitions);
    return report;
}

std::vector<SweepRow> sweep_users(const SimConfig& base, const std::vector<int>& user_counts) {
    std::vector<SweepRow> rows;
    for (int n : user_counts) {
        require(n > 0, "user loads must be positive", "loads");
        auto cfg = base;
        cfg.n_users = n;
        rows.push_back({n, cfg.n_resources, run(cfg).mean});
    }
    return rows;
}

std::vector<SweepRow> sweep_resources(const SimConfig& base, const std::vector<int>& resource_counts) {
    std::vector<SweepRow> rows;
    for (int w : resource_counts) {
        auto cfg = base;
        cfg.n_resources = w;
        rows.push_back({cfg.n_users, w, run(cfg).mean});
    }
    return rows;
}

PolicyComparison compare_policies(const SimConfig& config) {
    auto h = config;
    h.policy = Policy::hungarian;
    auto f = config;
    f.policy = Policy::fcfs;
    return {run(h), run(f)};
}

Preset preset(const std::string& name) {
    SimConfig c; // 10 / 60 / 1000 time units, rates 18k..68k, 3 repetitions
    if (name == "fig5") {
        c.n_resources = 25;
        return {name, c, {10, 20, 30, 40, 50, 60}};
    }
    if (name == "fig6") {
        c.n_users = 20;
        return {name, c, {2, 4, 6, 8, 10, 12, 14, 16, 18, 20}};
    }
    if (name == "fig7") {
        c.n_resources = 6;
        c.n_users = 10;
        c.repetitions = 1;
        return {name, c, {}};
    }
    throw Error(ErrorCode::config_error, "unknown preset '" + name + "' (fig5, fig6, fig7)", "preset");
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "load,resources,avg_wait,avg_qos,fairness,throughput\n";
    out << std::setprecision(10);
    for (const auto& r : rows) {
        out << r.users << ',' << r.resources << ',' << r.metrics.avg_wait << ',' << r.metrics.avg_qos << ','
            << r.metrics.fairness << ',' << r.metrics.throughput << '\n';
    }
}

nlohmann::json to_json(const SimMetrics& m) {
    auto series = [](const std::vector<TimePoint>& pts) {
        auto arr = nlohmann::json::array();
        for (const auto& p : pts) {
            arr.push_back({p.time, p.value});
        }
        return arr;
    };
    return {{"avg_wait", m.avg_wait},
            {"avg_qos", m.avg_qos},
            {"fairness", m.fairness},
            {"avg_queue_length", m.avg_queue_length},
            {"throughput", m.throughput},
            {"queue_length_series", series(m.queue_length_series)},
            {"cumulative_throughput_series", series(m.cumulative_throughput_series)},
            {"per_user_qos", m.per_user_qos},
            {"resource_rates", m.resource_rates}};
}

nlohmann::json to_json(const SimReport& r) {
    auto reps = nlohmann::json::array();
    for (const auto& m : r.repetitions) {
        reps.push_back(to_json(m));
    }
    return {{"config",
             {{"n_resources", r.config.n_resources},
              {"n_users", r.config.n_users},
              {"mean_interarrival", r.config.mean_interarrival},
              {"mean_service", r.config.mean_service},
              {"duration", r.config.duration},
              {"rate_range_hz", {r.config.rate_low_hz, r.config.rate_high_hz}},
              {"repetitions", r.config.repetitions},
              {"policy", to_string(r.config.policy)},
              {"seed", r.config.seed},
              {"arrival_model", r.config.arrival_model == ArrivalModel::closed ? "closed" : "open"}}},
            {"mean",
             {{"avg_wait", r.mean.avg_wait},
              {"avg_qos", r.mean.avg_qos},
              {"fairness", r.mean.fairness},
              {"avg_queue_length", r.mean.avg_queue_length},
              {"throughput", r.mean.throughput}}},
            {"repetitions", reps}};
}

void from_json(const nlohmann::json& j, SimConfig& c) {
    SimConfig d;
    c.n_resources = j.value("n_resources", d.n_resources);
    c.n_users = j.value("n_users", d.n_users);
    c.mean_interarrival = j.value("mean_interarrival", d.mean_interarrival);
    c.mean_service = j.value("mean_service", d.mean_service);
    c.duration = j.value("duration", d.duration);
    if (j.contains("rate_range_hz")) {
        c.rate_low_hz = j.at("rate_range_hz").at(0).get<double>();
        c.rate_high_hz = j.at("rate_range_hz").at(1).get<double>();
    }
    c.repetitions = j.value("repetitions", d.repetitions);
    c.policy = parse_policy(j.value("policy", std::string(to_string(d.policy))));
    c.seed = j.value("seed", d.seed);
    const auto model = j.value("arrival_model", std::string("closed"));
    if (model != "closed" && model != "open") {
        throw Error(ErrorCode::config_error, "arrival_model must be closed or open", "arrival_model");
    }
    c.arrival_model = model == "closed" ? ArrivalModel::closed : ArrivalModel::open;
}

} // namespace vqn::sim
