#include "vqn/service/service.hpp"

#include "vqn/error.hpp"
#include "vqn/measurement.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace vqn::service {

using nlohmann::json;

namespace {

constexpr const char* kAllocator = "allocator";
constexpr const char* kNotifier = "notifier";

[[noreturn]] void invalid(const std::string& field, const std::string& message) {
    throw Error(ErrorCode::validation, message, field);
}

struct MeasurementPlan {
    std::string function;
    double duration_s = 0.0;
    HistogramSpec histogram;
    std::optional<ChannelIndex> channel;
    Picoseconds start_ps = 0;
    CoincidenceSpec coincidence;
    json normalized;
};

template <typename T>
T param(const json& params, const char* name, T fallback) {
    if (!params.contains(name)) {
        return fallback;
    }
    try {
        return params.at(name).get<T>();
    } catch (const json::exception&) {
        invalid(std::string("params.") + name, std::string(name) + " has the wrong type");
    }
}

MeasurementPlan plan_measurement(const std::string& function, const json& params, const ServiceConfig& config) {
    if (!params.is_object()) {
        invalid("params", "params must be an object");
    }
    MeasurementPlan p;
    p.function = function;
    p.duration_s = param<double>(params, "duration_s", config.default_measurement_s);
    if (!std::isfinite(p.duration_s) || p.duration_s <= 0.0) {
        invalid("params.duration_s", "duration_s must be positive");
    }
    if (p.duration_s > config.measurement_cap_s) {
        invalid("params.duration_s", "duration_s exceeds the cap of " + std::to_string(config.measurement_cap_s) + " s");
    }
    p.normalized = {{"duration_s", p.duration_s}};
    if (function == "count_rate") {
        return p;
    }
    if (function == "counter") {
        for (const char* required : {"bin_width_ps", "n_bins"}) {
            if (!params.contains(required)) {
                invalid(std::string("params.") + required, std::string(required) + " is required");
            }
        }
        p.histogram.bin_width_ps = param<Picoseconds>(params, "bin_width_ps", 0);
        p.histogram.n_bins = param<std::int64_t>(params, "n_bins", 0);
        try {
            p.histogram.validate();
        } catch (const Error& e) {
            invalid("params." + e.field(), e.what());
        }
        if (params.contains("channel")) {
            p.channel = param<ChannelIndex>(params, "channel", 0);
        }
        p.start_ps = param<Picoseconds>(params, "start_ps", 0);
        p.normalized["bin_width_ps"] = p.histogram.bin_width_ps;
        p.normalized["n_bins"] = p.histogram.n_bins;
        p.normalized["start_ps"] = p.start_ps;
        if (p.channel) {
            p.normalized["channel"] = *p.channel;
        }
        return p;
    }
    if (function == "coincidence") {
        CoincidenceSpec d;
        p.coincidence.window_ps = param<Picoseconds>(params, "window_ps", d.window_ps);
        p.coincidence.background_offset_ps = param<Picoseconds>(params, "background_offset_ps", d.background_offset_ps);
        p.coincidence.background_width_ps = param<Picoseconds>(params, "background_width_ps", d.background_width_ps);
        p.coincidence.peak_bin_width_ps = param<Picoseconds>(params, "peak_bin_width_ps", d.peak_bin_width_ps);
        p.coincidence.peak_range_ps = param<Picoseconds>(params, "peak_range_ps", d.peak_range_ps);
        try {
            p.coincidence.validate();
        } catch (const Error& e) {
            invalid("params." + e.field(), e.what());
        }
        p.normalized["window_ps"] = p.coincidence.window_ps;
        p.normalized["background_offset_ps"] = p.coincidence.background_offset_ps;
        p.normalized["background_width_ps"] = p.coincidence.background_width_ps;
        return p;
    }
    invalid("function", "function must be count_rate, counter or coincidence");
}

} // namespace

std::string_view to_string(RequestKind k) noexcept {
    switch (k) {
    case RequestKind::channel_pair:
        return "channel_pair";
    case RequestKind::measurement:
        return "measurement";
    case RequestKind::release:
        return "release";
    }
    return "?";
}

std::string_view to_string(RequestStatus s) noexcept {
    switch (s) {
    case RequestStatus::processing:
        return "processing";
    case RequestStatus::processed:
        return "processed";
    case RequestStatus::completed:
        return "completed";
    }
    return "?";
}

Service::Service(ServiceConfig config, ServiceDeps deps)
    : config_(std::move(config)), clock_(std::move(deps.clock)), journal_(std::move(deps.journal)),
      sink_(std::move(deps.sink)), backend_(std::move(deps.backend)), token_rng_(std::random_device{}()) {
    config_.validate();
    if (!clock_) {
        clock_ = std::make_shared<SystemClock>();
    }
    if (!journal_) {
        journal_ = open_journal(config_.store_path);
    }
    if (!sink_) {
        sink_ = make_sink(config_.notification);
    }
    if (!backend_) {
        backend_ = make_backend(config_);
    }
    for (std::size_t i = 0; i < config_.source.pairs.size(); ++i) {
        const auto& p = config_.source.pairs[i];
        state_.resources.push_back(ChannelPairResource{static_cast<PairId>(i + 1), p.signal, p.idler,
                                                       RateTrace(p.detected_pair_rate_hz), std::nullopt});
    }
    const auto entries = journal_->entries();
    for (const auto& e : entries) {
        apply(e);
    }
    if (!entries.empty()) {
        spdlog::info("replayed {} journal entries", entries.size());
    }
}

Service::~Service() { stop(); }

double Service::now_locked() {
    last_time_ = std::max(last_time_, clock_->now());
    return last_time_;
}

std::uint64_t Service::record(json entry) {
    const auto seq = journal_->append(entry);
    entry["seq"] = seq;
    apply(entry);
    return seq;
}

UserSession* Service::session_of(const UserId& user) {
    const auto it = session_index_.find(user);
    return it == session_index_.end() ? nullptr : &state_.sessions[it->second];
}

const UserSession* Service::session_of(const UserId& user) const {
    const auto it = session_index_.find(user);
    return it == session_index_.end() ? nullptr : &state_.sessions[it->second];
}

ChannelPairResource* Service::resource_of(PairId pair) {
    for (auto& r : state_.resources) {
        if (r.id == pair) {
            return &r;
        }
    }
    return nullptr;
}

RequestRecord& Service::request_ref(const std::string& id) {
    const auto it = requests_.find(id);
    if (it == requests_.end()) {
        throw Error(ErrorCode::not_found, "unknown request " + id);
    }
    return it->second;
}

void Service::set_status(RequestRecord& r, RequestStatus s, double at) {
    if (static_cast<int>(s) <= static_cast<int>(r.status) && !r.history.empty()) {
        throw Error(ErrorCode::conflict, "request " + r.id + " cannot move from " + std::string(to_string(r.status)) +
                                             " to " + std::string(to_string(s)));
    }
    r.status = s;
    r.updated_at = std::max(r.updated_at, at);
    r.history.push_back({s, at});
}

std::string Service::next_request_id() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "req-%06zu", requests_.size() + 1);
    return buf;
}

void Service::apply(const json& e) {
    const auto type = e.at("type").get<std::string>();
    const double at = e.at("at").get<double>();
    last_time_ = std::max(last_time_, at);

    if (type == "request") {
        const auto id = e.at("request_id").get<std::string>();
        const auto user = e.at("user").get<UserId>();
        RequestRecord r;
        r.id = id;
        r.user_id = user;
        r.kind = RequestKind::channel_pair;
        r.created_at = r.updated_at = at;
        r.payload = e.value("payload", json::object());
        set_status(r, RequestStatus::processing, at);
        requests_.emplace(id, std::move(r));
        request_order_.push_back(id);
        if (auto* s = session_of(user)) {
            s->request(at);
        } else {
            session_index_.emplace(user, state_.sessions.size());
            state_.sessions.emplace_back(user, at);
        }
        bus_.restore({Topic::user_request, e.at("bus_seq").get<std::uint64_t>(),
                      {{"kind", "channel_pair"}, {"request_id", id}, {"user", user}}});
    } else if (type == "assign") {
        const auto pair = e.at("pair").get<PairId>();
        const auto user = e.at("user").get<UserId>();
        const auto id = e.at("request_id").get<std::string>();
        const double rate = e.at("rate_hz").get<double>();
        auto* res = resource_of(pair);
        res->assignee = user;
        session_of(user)->assign(pair, at, rate);
        auto& r = request_ref(id);
        r.pair_id = pair;
        set_status(r, RequestStatus::processed, at);
        bus_.restore({Topic::response, e.at("bus_seq").get<std::uint64_t>(),
                      {{"request_id", id},
                       {"user", user},
                       {"pair_id", pair},
                       {"signal", res->signal},
                       {"idler", res->idler},
                       {"rate_hz", rate}}});
    } else if (type == "complete") {
        auto& r = request_ref(e.at("request_id").get<std::string>());
        r.delivery_attempts = e.value("attempts", 0);
        r.delivery_failed = !e.value("delivered", true);
        set_status(r, RequestStatus::completed, at);
    } else if (type == "dead_letter") {
        dead_letters_.push_back(e);
    } else if (type == "release") {
        const auto pair = e.at("pair").get<PairId>();
        const auto user = e.at("user").get<UserId>();
        const auto id = e.at("request_id").get<std::string>();
        resource_of(pair)->assignee.reset();
        session_of(user)->release(at);
        last_released_[user] = pair;
        RequestRecord r;
        r.id = id;
        r.user_id = user;
        r.kind = RequestKind::release;
        r.created_at = r.updated_at = at;
        r.pair_id = pair;
        r.payload = {{"pair_id", pair}};
        set_status(r, RequestStatus::processing, at);
        set_status(r, RequestStatus::processed, at);
        set_status(r, RequestStatus::completed, at);
        requests_.emplace(id, std::move(r));
        request_order_.push_back(id);
        bus_.restore({Topic::user_request, e.at("bus_seq").get<std::uint64_t>(),
                      {{"kind", "release"}, {"request_id", id}, {"user", user}, {"pair_id", pair}}});
    } else if (type == "measurement") {
        const auto id = e.at("request_id").get<std::string>();
        const auto pair = e.at("pair").get<PairId>();
        const double started = e.at("started").get<double>();
        RequestRecord r;
        r.id = id;
        r.user_id = e.at("user").get<UserId>();
        r.kind = RequestKind::measurement;
        r.created_at = r.updated_at = started;
        r.pair_id = pair;
        r.payload = {{"function", e.at("function")}, {"params", e.at("params")}};
        r.result_ref = "measurements/" + id;
        set_status(r, RequestStatus::processing, started);
        set_status(r, RequestStatus::processed, at);
        set_status(r, RequestStatus::completed, at);
        requests_.emplace(id, std::move(r));
        request_order_.push_back(id);
        results_[id] = e.at("result");
        acquisitions_ = std::max(acquisitions_, e.at("acquisition").get<std::uint64_t>() + 1);
        if (e.contains("rate_hz")) {
            const double rate = e.at("rate_hz").get<double>();
            auto* res = resource_of(pair);
            res->rate.set(at, rate);
            if (res->assignee) {
                session_of(*res->assignee)->update_rate(at, rate);
            }
        }
    } else if (type == "ack") {
        bus_.ack(e.at("subscriber").get<std::string>(), parse_topic(e.at("topic").get<std::string>()),
                 e.at("bus_seq").get<std::uint64_t>());
    } else {
        throw Error(ErrorCode::io_error, "unknown journal entry type '" + type + "'");
    }
}

LoginResult Service::login(const std::string& user, const std::string& secret) {
    const auto it = config_.users.find(user);
    if (it == config_.users.end() || it->second != secret) {
        throw Error(ErrorCode::unauthorized, "invalid credentials");
    }
    std::lock_guard lock(token_mu_);
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(token_rng_()),
                  static_cast<unsigned long long>(token_rng_()));
    const double expires = clock_->now() + config_.token_ttl_s;
    tokens_[buf] = {user, expires};
    return {buf, expires};
}

UserId Service::authenticate(const std::string& token) const { return authenticate_locked(token); }

UserId Service::authenticate_locked(const std::string& token) const {
    std::lock_guard lock(token_mu_);
    const auto it = tokens_.find(token);
    if (it == tokens_.end()) {
        throw Error(ErrorCode::unauthorized, "missing or unknown token");
    }
    if (clock_->now() >= it->second.expires_at) {
        throw Error(ErrorCode::unauthorized, "token expired");
    }
    return it->second.user;
}

RequestRecord Service::submit_pair_request(const std::string& token) {
    const auto user = authenticate(token);
    std::lock_guard lock(mu_);
    if (const auto* s = session_of(user)) {
        if (s->state() == SessionState::waiting) {
            throw Error(ErrorCode::conflict, "a pair request for " + user + " is already queued");
        }
        if (s->state() == SessionState::served) {
            throw Error(ErrorCode::conflict, user + " already holds pair " + std::to_string(*s->current_pair()));
        }
    }
    const double at = now_locked();
    const auto id = next_request_id();
    record({{"type", "request"},
            {"at", at},
            {"request_id", id},
            {"user", user},
            {"payload", json::object()},
            {"bus_seq", bus_.last_sequence(Topic::user_request) + 1}});
    return requests_.at(id);
}

RequestRecord Service::request_status(const std::string& token, const std::string& request_id) const {
    const auto user = authenticate(token);
    std::lock_guard lock(mu_);
    const auto it = requests_.find(request_id);
    if (it == requests_.end()) {
        throw Error(ErrorCode::not_found, "unknown request " + request_id);
    }
    if (it->second.user_id != user) {
        throw Error(ErrorCode::forbidden, "request " + request_id + " belongs to another user");
    }
    return it->second;
}

ResourceRecord Service::resource_view(const ChannelPairResource& r) const {
    ResourceRecord v{r.id, r.signal, r.idler, r.rate.samples().back().rate_hz, r.assignee, std::nullopt};
    if (r.assignee) {
        const auto& log = session_of(*r.assignee)->assignment_log();
        v.since = log.back().start;
    }
    return v;
}

std::vector<ResourceRecord> Service::resources() const {
    std::lock_guard lock(mu_);
    std::vector<ResourceRecord> out;
    for (const auto& r : state_.resources) {
        out.push_back(resource_view(r));
    }
    return out;
}

std::vector<ResourceRecord> Service::list_resources(const std::string& token) const {
    authenticate(token);
    return resources();
}

QueuePosition Service::queue_position(const std::string& token) const {
    const auto user = authenticate(token);
    std::lock_guard lock(mu_);
    std::vector<const UserSession*> waiting;
    for (const auto& s : state_.sessions) {
        if (s.state() == SessionState::waiting) {
            waiting.push_back(&s);
        }
    }
    std::sort(waiting.begin(), waiting.end(), [](auto* a, auto* b) {
        if (a->waiting_since() != b->waiting_since()) {
            return a->waiting_since() < b->waiting_since();
        }
        return a->user() < b->user();
    });
    QueuePosition q;
    q.waiting = static_cast<int>(waiting.size());
    for (std::size_t i = 0; i < waiting.size(); ++i) {
        if (waiting[i]->user() == user) {
            q.position = static_cast<int>(i + 1);
        }
    }
    return q;
}

json Service::run_measurement(const std::string& token, PairId pair, const std::string& function,
                              const json& params) {
    const auto user = authenticate(token);
    const auto plan = plan_measurement(function, params, config_);
    ChannelIndex signal = 0;
    ChannelIndex idler = 0;
    std::uint64_t acquisition = 0;
    double started = 0.0;
    {
        std::lock_guard lock(mu_);
        const auto* res = resource_of(pair);
        if (!res) {
            throw Error(ErrorCode::not_found, "unknown pair " + std::to_string(pair), "pair_id");
        }
        if (res->assignee != user) {
            throw Error(ErrorCode::forbidden, "pair " + std::to_string(pair) + " is not held by " + user, "pair_id");
        }
        if (plan.channel && *plan.channel != res->signal && *plan.channel != res->idler) {
            invalid("params.channel", "channel must be one of the pair's two channels");
        }
        signal = res->signal;
        idler = res->idler;
        acquisition = acquisitions_++;
        started = now_locked();
    }

    const auto streams = backend_->acquire(signal, idler, plan.duration_s, acquisition);
    json result;
    std::optional<double> rate;
    if (function == "count_rate") {
        const auto rates = count_rate(streams, {signal, idler}, plan.duration_s);
        json r = json::object();
        for (const auto& [ch, hz] : rates) {
            r[std::to_string(ch)] = hz;
        }
        result = {{"rates_hz", r}};
    } else if (function == "counter") {
        const auto ch = plan.channel.value_or(signal);
        result = counter(streams.at(ch), plan.histogram, plan.start_ps);
        result["channel"] = ch;
    } else {
        const auto r = coincidence_count(streams.at(signal), streams.at(idler), plan.coincidence, plan.duration_s);
        result = r;
        rate = r.coincidence_rate_hz;
    }
    result["function"] = function;
    result["pair_id"] = pair;
    result["duration_s"] = plan.duration_s;

    std::lock_guard lock(mu_);
    const double at = now_locked();
    const auto id = next_request_id();
    result["request_id"] = id;
    json entry{{"type", "measurement"}, {"at", at},          {"started", started},
               {"request_id", id},      {"user", user},      {"pair", pair},
               {"function", function},  {"params", plan.normalized}, {"acquisition", acquisition},
               {"result", result}};
    if (rate && std::isfinite(*rate)) {
        entry["rate_hz"] = *rate;
    }
    record(std::move(entry));
    return result;
}

ReleaseResult Service::release_pair(const std::string& token, PairId pair) {
    const auto user = authenticate(token);
    std::lock_guard lock(mu_);
    const auto* res = resource_of(pair);
    if (!res) {
        throw Error(ErrorCode::not_found, "unknown pair " + std::to_string(pair), "pair_id");
    }
    if (res->assignee == user) {
        const double at = now_locked();
        const auto id = next_request_id();
        record({{"type", "release"},
                {"at", at},
                {"pair", pair},
                {"user", user},
                {"request_id", id},
                {"bus_seq", bus_.last_sequence(Topic::user_request) + 1}});
        return {pair, true, id};
    }
    const auto last = last_released_.find(user);
    if (last != last_released_.end() && last->second == pair) {
        return {pair, false, std::nullopt};
    }
    throw Error(ErrorCode::forbidden, "pair " + std::to_string(pair) + " is not held by " + user, "pair_id");
}

std::size_t Service::run_allocation_cycle() {
    std::lock_guard lock(mu_);
    const auto events = bus_.poll(kAllocator, Topic::user_request, std::numeric_limits<std::size_t>::max());
    if (events.empty()) {
        return 0;
    }
    const double at = now_locked();
    std::map<UserId, std::string> pending;
    for (const auto& id : request_order_) {
        const auto& r = requests_.at(id);
        if (r.kind == RequestKind::channel_pair && r.status == RequestStatus::processing) {
            pending[r.user_id] = id;
        }
    }
    auto trial = state_;
    const auto decisions = allocate(trial, at, config_.policy);
    for (const auto& d : decisions) {
        auto* res = resource_of(d.pair);
        record({{"type", "assign"},
                {"at", at},
                {"pair", d.pair},
                {"user", d.user},
                {"request_id", pending.at(d.user)},
                {"rate_hz", res->rate.at(at)},
                {"bus_seq", bus_.last_sequence(Topic::response) + 1}});
    }
    record({{"type", "ack"},
            {"at", at},
            {"subscriber", kAllocator},
            {"topic", "user_request"},
            {"bus_seq", events.back().sequence}});
    return decisions.size();
}

std::size_t Service::run_notification_cycle() {
    std::lock_guard pass(notify_mu_);
    const auto events = bus_.poll(kNotifier, Topic::response, std::numeric_limits<std::size_t>::max());
    std::size_t completed = 0;
    for (const auto& e : events) {
        const auto id = e.payload.at("request_id").get<std::string>();
        bool done = false;
        {
            std::lock_guard lock(mu_);
            done = requests_.at(id).status == RequestStatus::completed;
        }
        json note = e.payload;
        note["event"] = "pair_assigned";
        std::optional<DeliveryRecord> delivery;
        if (!done) {
            delivery = deliver_with_retry(*sink_, note, config_.notification, *clock_);
        }
        std::lock_guard lock(mu_);
        const double at = now_locked();
        if (delivery) {
            if (!delivery->delivered) {
                spdlog::error("notification for {} dead-lettered after {} attempts: {}", id, delivery->attempts,
                              delivery->last_error);
                record({{"type", "dead_letter"},
                        {"at", at},
                        {"request_id", id},
                        {"attempts", delivery->attempts},
                        {"error", delivery->last_error},
                        {"notification", note}});
            }
            record({{"type", "complete"},
                    {"at", at},
                    {"request_id", id},
                    {"delivered", delivery->delivered},
                    {"attempts", delivery->attempts}});
            ++completed;
        }
        record({{"type", "ack"}, {"at", at}, {"subscriber", kNotifier}, {"topic", "response"}, {"bus_seq", e.sequence}});
    }
    return completed;
}

void Service::run_pending() {
    for (;;) {
        const bool requests = !bus_.poll(kAllocator, Topic::user_request, 1).empty();
        const bool responses = !bus_.poll(kNotifier, Topic::response, 1).empty();
        if (!requests && !responses) {
            return;
        }
        run_allocation_cycle();
        run_notification_cycle();
    }
}

void Service::start() {
    if (running_.exchange(true)) {
        return;
    }
    allocator_thread_ = std::thread([this] {
        while (running_) {
            bus_.wait(kAllocator, Topic::user_request, std::chrono::milliseconds(250));
            if (!running_) {
                break;
            }
            try {
                run_allocation_cycle();
            } catch (const std::exception& ex) {
                spdlog::error("allocation worker: {}", ex.what());
            }
        }
    });
    notifier_thread_ = std::thread([this] {
        while (running_) {
            bus_.wait(kNotifier, Topic::response, std::chrono::milliseconds(250));
            if (!running_) {
                break;
            }
            try {
                run_notification_cycle();
            } catch (const std::exception& ex) {
                spdlog::error("notifier: {}", ex.what());
            }
        }
    });
}

void Service::stop() {
    if (!running_.exchange(false)) {
        return;
    }
    bus_.wake();
    if (allocator_thread_.joinable()) {
        allocator_thread_.join();
    }
    if (notifier_thread_.joinable()) {
        notifier_thread_.join();
    }
}

std::optional<RequestRecord> Service::find_request(const std::string& request_id) const {
    std::lock_guard lock(mu_);
    const auto it = requests_.find(request_id);
    if (it == requests_.end()) {
        return std::nullopt;
    }
    return it->second;
}

json Service::snapshot() const {
    std::lock_guard lock(mu_);
    json resources = json::array();
    for (const auto& r : state_.resources) {
        resources.push_back(to_json(resource_view(r)));
    }
    json requests = json::array();
    for (const auto& id : request_order_) {
        requests.push_back(to_json(requests_.at(id)));
    }
    json sessions = json::array();
    for (const auto& s : state_.sessions) {
        sessions.push_back({{"user", s.user()},
                            {"state", to_string(s.state())},
                            {"received_pairs", s.received_pairs(last_time_)},
                            {"total_time", s.total_time(last_time_)},
                            {"qos", qos(s, last_time_)}});
    }
    json results = json::object();
    for (const auto& [id, r] : results_) {
        results[id] = r;
    }
    return {{"resources", resources},
            {"requests", requests},
            {"sessions", sessions},
            {"results", results},
            {"dead_letters", dead_letters_.size()},
            {"bus",
             {{"user_request", bus_.last_sequence(Topic::user_request)},
              {"response", bus_.last_sequence(Topic::response)},
              {"allocator_acked", bus_.acked(kAllocator, Topic::user_request)},
              {"notifier_acked", bus_.acked(kNotifier, Topic::response)}}},
            {"time", last_time_}};
}

std::vector<json> Service::journal_entries() const { return journal_->entries(); }

json to_json(const RequestRecord& r) {
    json history = json::array();
    for (const auto& h : r.history) {
        history.push_back({{"status", to_string(h.status)}, {"at", h.at}});
    }
    return {{"id", r.id},
            {"user_id", r.user_id},
            {"kind", to_string(r.kind)},
            {"status", to_string(r.status)},
            {"created_at", r.created_at},
            {"updated_at", r.updated_at},
            {"payload", r.payload},
            {"result_ref", r.result_ref ? json(*r.result_ref) : json(nullptr)},
            {"pair_id", r.pair_id ? json(*r.pair_id) : json(nullptr)},
            {"delivery_failed", r.delivery_failed},
            {"delivery_attempts", r.delivery_attempts},
            {"history", history}};
}

json to_json(const ResourceRecord& r) {
    json status = r.assignee ? json{{"state", "assigned"}, {"user_id", *r.assignee}, {"since", *r.since}}
                             : json{{"state", "free"}};
    return {{"pair_id", r.id},
            {"signal", r.signal},
            {"idler", r.idler},
            {"current_rate_hz", r.current_rate_hz},
            {"status", status}};
}

json to_json(const QueuePosition& q) {
    return {{"position", q.position ? json(*q.position) : json(nullptr)}, {"waiting", q.waiting}};
}

JournalAudit audit_journal(const std::vector<json>& entries) {
    JournalAudit a;
    std::map<PairId, UserId> holder;
    std::map<UserId, PairId> holding;
    std::map<std::string, int> status;
    auto fail = [&](std::string why) {
        if (a.injective) {
            a.injective = false;
            a.violation = std::move(why);
        }
    };
    auto advance = [&](const std::string& id, int from, int to) {
        auto it = status.find(id);
        if (it == status.end() || it->second != from) {
            a.statuses_monotone = false;
            return;
        }
        it->second = to;
    };
    for (const auto& e : entries) {
        const auto type = e.at("type").get<std::string>();
        if (type == "request") {
            ++a.pair_requests;
            status[e.at("request_id").get<std::string>()] = 0;
        } else if (type == "assign") {
            const auto pair = e.at("pair").get<PairId>();
            const auto user = e.at("user").get<UserId>();
            if (holder.count(pair)) {
                fail("pair " + std::to_string(pair) + " assigned to " + user + " while held by " + holder[pair]);
            }
            if (holding.count(user)) {
                fail(user + " assigned pair " + std::to_string(pair) + " while holding " +
                     std::to_string(holding[user]));
            }
            holder[pair] = user;
            holding[user] = pair;
            ++a.assignments;
            a.max_concurrent = std::max(a.max_concurrent, holder.size());
            advance(e.at("request_id").get<std::string>(), 0, 1);
        } else if (type == "release") {
            const auto pair = e.at("pair").get<PairId>();
            const auto user = e.at("user").get<UserId>();
            const auto it = holder.find(pair);
            if (it == holder.end() || it->second != user) {
                fail(user + " released pair " + std::to_string(pair) + " it did not hold");
            }
            holder.erase(pair);
            holding.erase(user);
        } else if (type == "complete") {
            ++a.completed;
            if (!e.value("delivered", true)) {
                ++a.delivery_failed;
            }
            advance(e.at("request_id").get<std::string>(), 1, 2);
        }
    }
    return a;
}

} // namespace vqn::service
