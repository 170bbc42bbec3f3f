#include "vqn/error.hpp"
#include "vqn/service/bench.hpp"
#include "vqn/service/http_api.hpp"
#include "vqn/service/service.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <unistd.h>

using namespace vqn;
using namespace vqn::service;
using nlohmann::json;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("vqn_service_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

ServiceConfig config_for(int users, Policy policy = Policy::fcfs) {
    ServiceConfig c;
    for (int i = 0; i < users; ++i) {
        c.users["user" + std::to_string(i)] = "pw" + std::to_string(i);
    }
    c.policy = policy;
    c.default_measurement_s = 0.05;
    return c;
}

/// Records every notification; fails the first `failures` attempts.
class RecordingSink final : public NotificationSink {
public:
    explicit RecordingSink(int failures = 0) : failures_(failures) {}
    bool deliver(const json& n, std::string& error) override {
        ++attempts;
        if (failures_ > 0) {
            --failures_;
            error = "injected failure";
            return false;
        }
        delivered.push_back(n);
        return true;
    }
    std::atomic<int> attempts{0};
    std::vector<json> delivered;

private:
    int failures_;
};

struct Harness {
    std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
    RecordingSink* sink = nullptr;
    std::unique_ptr<Service> service;
    std::vector<std::string> tokens;

    explicit Harness(ServiceConfig config, int sink_failures = 0, std::unique_ptr<Journal> journal = nullptr) {
        auto s = std::make_unique<RecordingSink>(sink_failures);
        sink = s.get();
        ServiceDeps deps;
        deps.clock = clock;
        deps.sink = std::move(s);
        deps.journal = std::move(journal);
        const auto users = config.users;
        service = std::make_unique<Service>(std::move(config), std::move(deps));
        for (const auto& [user, secret] : users) {
            tokens.push_back(service->login(user, secret).token);
        }
    }
    Service& operator*() { return *service; }
    Service* operator->() { return service.get(); }
};

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected vqn::Error");
    return ErrorCode::io_error;
}

std::string field_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.field();
    }
    return "<no error>";
}

} // namespace

TEST_CASE("service config parsing and env overrides") {
    const auto c = parse_service_config(json::parse(R"({
        "listen_address": "0.0.0.0", "port": 9000,
        "users": {"alice": "a"}, "bench_users": {"count": 3, "secret": "b"},
        "policy": "hungarian", "backend": "stub",
        "notification": {"sink": "webhook", "webhook_url": "http://127.0.0.1:1/hook", "max_attempts": 4},
        "store_path": "/tmp/x.jsonl", "token_ttl_s": 60, "measurement_cap_s": 30})"));
    CHECK(c.port == 9000);
    CHECK(c.users.size() == 4);
    CHECK(c.users.at("bench-2") == "b");
    CHECK(c.policy == Policy::hungarian);
    CHECK(c.backend == BackendKind::stub);
    CHECK(c.notification.sink == SinkKind::webhook);
    CHECK(c.notification.max_attempts == 4);
    CHECK(c.store_path == "/tmp/x.jsonl");
    CHECK(c.measurement_cap_s == 30.0);
    CHECK(c.source.pairs.size() == 3);

    auto d = parse_service_config(json::parse(R"({"users": {"u": "p"}})"));
    CHECK(d.policy == Policy::fcfs);
    CHECK(d.backend == BackendKind::virtual_source);
    CHECK(d.measurement_cap_s == 120.0);
    std::map<std::string, std::string> env{{"VQN_PORT", "7001"}, {"VQN_POLICY", "hungarian"},
                                           {"VQN_STORE_PATH", "/tmp/j"}};
    apply_env_overrides(d, [&](const std::string& k) -> std::optional<std::string> {
        const auto it = env.find(k);
        return it == env.end() ? std::nullopt : std::optional(it->second);
    });
    CHECK(d.port == 7001);
    CHECK(d.policy == Policy::hungarian);
    CHECK(d.store_path == "/tmp/j");

    CHECK(field_of([] { parse_service_config(json::parse(R"({"users": {}})")); }) == "users");
    CHECK(field_of([] { parse_service_config(json::parse(R"({"users": {"u": "p"}, "policy": "lifo"})")); }) ==
          "policy");
    CHECK(field_of([] {
              parse_service_config(json::parse(R"({"users": {"u": "p"}, "notification": {"sink": "webhook"}})"));
          }) == "notification.webhook_url");
    CHECK(code_of([] { load_service_config("/nonexistent/config.json"); }) == ErrorCode::io_error);
}

TEST_CASE("event bus sequences and redelivery") {
    EventBus bus;
    const auto a = bus.publish(Topic::user_request, {{"n", 1}});
    const auto b = bus.publish(Topic::user_request, {{"n", 2}});
    const auto r = bus.publish(Topic::response, {{"n", 3}});
    CHECK(a.sequence == 1);
    CHECK(b.sequence == 2);
    CHECK(r.sequence == 1); // per-topic counters

    CHECK(bus.poll("w", Topic::user_request).size() == 2);
    // not acked: delivered again
    CHECK(bus.poll("w", Topic::user_request).size() == 2);
    bus.ack("w", Topic::user_request, 1);
    const auto rest = bus.poll("w", Topic::user_request);
    REQUIRE(rest.size() == 1);
    CHECK(rest[0].payload["n"] == 2);
    // cursors are per subscriber
    CHECK(bus.poll("other", Topic::user_request).size() == 2);
    bus.ack("w", Topic::user_request, 2);
    CHECK_FALSE(bus.wait("w", Topic::user_request, std::chrono::milliseconds(1)));
    CHECK(bus.wait("other", Topic::user_request, std::chrono::milliseconds(1)));

    CHECK_THROWS_AS(bus.restore({Topic::user_request, 2, {}}), Error);
    bus.restore({Topic::user_request, 7, {}});
    CHECK(bus.last_sequence(Topic::user_request) == 7);
}

TEST_CASE("file journal survives a torn tail") {
    const auto dir = temp_dir("journal");
    const auto path = dir / "j.jsonl";
    {
        FileJournal j(path);
        CHECK(j.append({{"type", "x"}}) == 1);
        CHECK(j.append({{"type", "y"}}) == 2);
    }
    const auto full = std::filesystem::file_size(path);
    {
        std::ofstream(path, std::ios::app) << R"({"type":"z","se)";
    }
    {
        FileJournal j(path);
        REQUIRE(j.entries().size() == 2);
        CHECK(j.entries()[1]["type"] == "y");
        CHECK(std::filesystem::file_size(path) == full);
        CHECK(j.append({{"type", "z"}}) == 3);
    }
    CHECK(FileJournal(path).entries().size() == 3);

    {
        std::ofstream(path, std::ios::app) << "garbage\n" << R"({"type":"w","seq":5})" << "\n";
    }
    CHECK(code_of([&] { FileJournal{path}; }) == ErrorCode::io_error);

    MemoryJournal m;
    CHECK(m.append({{"a", 1}}) == 1);
    CHECK(m.entries()[0]["seq"] == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("authentication") {
    auto cfg = config_for(1);
    cfg.token_ttl_s = 60.0;
    Harness h(cfg);
    CHECK(h->authenticate(h.tokens[0]) == "user0");
    CHECK(code_of([&] { h->login("user0", "wrong"); }) == ErrorCode::unauthorized);
    CHECK(code_of([&] { h->login("nobody", "pw0"); }) == ErrorCode::unauthorized);
    CHECK(code_of([&] { h->submit_pair_request("bogus"); }) == ErrorCode::unauthorized);
    h.clock->advance(59.0);
    CHECK_NOTHROW(h->list_resources(h.tokens[0]));
    h.clock->advance(1.0);
    CHECK(code_of([&] { h->list_resources(h.tokens[0]); }) == ErrorCode::unauthorized);
    const auto fresh = h->login("user0", "pw0");
    CHECK(fresh.expires_at == doctest::Approx(h.clock->now() + 60.0));
    CHECK_NOTHROW(h->list_resources(fresh.token));
}

TEST_CASE("single request lifecycle") {
    Harness h(config_for(1));
    const auto& t = h.tokens[0];

    CHECK(h->run_allocation_cycle() == 0); // empty queue: nothing to do
    CHECK(h->journal_entries().empty());

    const auto r = h->submit_pair_request(t);
    CHECK(r.status == RequestStatus::processing);
    CHECK(r.kind == RequestKind::channel_pair);
    CHECK(h->request_status(t, r.id).status == RequestStatus::processing);
    const auto q = h->queue_position(t);
    CHECK(q.position == 1);
    CHECK(q.waiting == 1);

    h.clock->advance(0.5);
    CHECK(h->run_allocation_cycle() == 1); // one cycle suffices
    auto s = h->request_status(t, r.id);
    CHECK(s.status == RequestStatus::processed);
    REQUIRE(s.pair_id.has_value());
    CHECK_FALSE(h->queue_position(t).position.has_value());

    h.clock->advance(0.5);
    CHECK(h->run_notification_cycle() == 1);
    s = h->request_status(t, r.id);
    CHECK(s.status == RequestStatus::completed);
    CHECK_FALSE(s.delivery_failed);
    REQUIRE(s.history.size() == 3);
    CHECK(s.history[0].at <= s.history[1].at);
    CHECK(s.history[1].at <= s.history[2].at);
    REQUIRE(h.sink->delivered.size() == 1);
    CHECK(h.sink->delivered[0]["request_id"] == r.id);
    CHECK(h.sink->delivered[0]["user"] == "user0");
    CHECK(h.sink->delivered[0]["pair_id"] == *s.pair_id);

    int assigned = 0;
    for (const auto& res : h->list_resources(t)) {
        assigned += res.assignee ? 1 : 0;
    }
    CHECK(assigned == 1);
    // a second notifier pass redelivers nothing
    CHECK(h->run_notification_cycle() == 0);
    CHECK(h.sink->delivered.size() == 1);
}

TEST_CASE("one pair per user") {
    Harness h(config_for(2));
    const auto& t = h.tokens[0];
    h->submit_pair_request(t);
    CHECK(code_of([&] { h->submit_pair_request(t); }) == ErrorCode::conflict);
    h->run_pending();
    CHECK(code_of([&] { h->submit_pair_request(t); }) == ErrorCode::conflict);
}

TEST_CASE("three users and three pairs all complete") {
    for (auto policy : {Policy::fcfs, Policy::hungarian}) {
        Harness h(config_for(3, policy));
        std::vector<std::string> ids;
        for (const auto& t : h.tokens) {
            ids.push_back(h->submit_pair_request(t).id);
            h.clock->advance(0.1);
        }
        h->run_pending();
        std::set<int> pairs;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto r = h->request_status(h.tokens[i], ids[i]);
            CHECK(r.status == RequestStatus::completed);
            pairs.insert(*r.pair_id);
        }
        CHECK(pairs.size() == 3);
        CHECK(h.sink->delivered.size() == 3);
        const auto audit = audit_journal(h->journal_entries());
        CHECK(audit.injective);
        CHECK(audit.statuses_monotone);
        CHECK(audit.max_concurrent == 3);
    }
}

TEST_CASE("release hands the pair to the next queued user") {
    Harness h(config_for(4));
    std::vector<std::string> ids;
    for (const auto& t : h.tokens) {
        ids.push_back(h->submit_pair_request(t).id);
        h.clock->advance(0.1);
    }
    h->run_pending();
    // three pairs, four users: user3 queues
    CHECK(h->queue_position(h.tokens[3]).position == 1);
    const auto held = *h->request_status(h.tokens[0], ids[0]).pair_id;

    CHECK(code_of([&] { h->release_pair(h.tokens[3], held); }) == ErrorCode::forbidden);
    CHECK(code_of([&] { h->release_pair(h.tokens[0], 99); }) == ErrorCode::not_found);

    const auto rel = h->release_pair(h.tokens[0], held);
    CHECK(rel.released);
    REQUIRE(rel.request_id.has_value());
    CHECK(h->find_request(*rel.request_id)->kind == RequestKind::release);
    CHECK(h->find_request(*rel.request_id)->status == RequestStatus::completed);
    // double release is a no-op
    const auto again = h->release_pair(h.tokens[0], held);
    CHECK_FALSE(again.released);

    CHECK(h->run_allocation_cycle() == 1);
    CHECK(h->request_status(h.tokens[3], ids[3]).pair_id == held);
    // still a no-op for the previous holder, even though someone else holds it now
    CHECK_FALSE(h->release_pair(h.tokens[0], held).released);

    // release then re-request works
    const auto again_req = h->submit_pair_request(h.tokens[0]);
    CHECK(again_req.status == RequestStatus::processing);
    h->run_pending();
    CHECK(h->request_status(h.tokens[0], again_req.id).status == RequestStatus::processing);
    CHECK(audit_journal(h->journal_entries()).injective);
}

TEST_CASE("measurements against the virtual backend") {
    auto cfg = config_for(2);
    Harness h(cfg);
    const auto& t = h.tokens[0];
    const auto r = h->submit_pair_request(t);
    h->run_pending();
    const auto pair = *h->request_status(t, r.id).pair_id;

    SUBCASE("counter with 100 ps bins and 100 bins") {
        const auto res = h->run_measurement(t, pair, "counter", {{"bin_width_ps", 100}, {"n_bins", 100}});
        CHECK(res["counts"].size() == 100);
        CHECK(res["bin_width_ps"] == 100);
        CHECK(res["function"] == "counter");
        const auto rec = h->find_request(res["request_id"].get<std::string>());
        REQUIRE(rec.has_value());
        CHECK(rec->kind == RequestKind::measurement);
        CHECK(rec->status == RequestStatus::completed);
        CHECK(rec->result_ref == "measurements/" + rec->id);
    }
    SUBCASE("count_rate reports both channels") {
        const auto res = h->run_measurement(t, pair, "count_rate", {{"duration_s", 0.2}});
        REQUIRE(res["rates_hz"].size() == 2);
        for (const auto& [ch, hz] : res["rates_hz"].items()) {
            CHECK(hz.get<double>() > 200000.0);
            CHECK(hz.get<double>() < 330000.0);
        }
    }
    SUBCASE("coincidence refreshes the pair rate") {
        const auto res = h->run_measurement(t, pair, "coincidence", {{"duration_s", 1.0}});
        const double cc = res["cc_hz"].get<double>();
        CHECK(cc > 40000.0);
        REQUIRE(res["car"].is_number());
        CHECK(res["car"].get<double>() > 800.0);
        CHECK(res["car"].get<double>() < 3000.0);
        for (const auto& rr : h->resources()) {
            if (rr.id == pair) {
                CHECK(rr.current_rate_hz == cc);
            }
        }
    }
    SUBCASE("validation and ownership") {
        CHECK(field_of([&] { h->run_measurement(t, pair, "counter", {{"n_bins", 10}}); }) == "params.bin_width_ps");
        CHECK(field_of([&] { h->run_measurement(t, pair, "counter", {{"bin_width_ps", 0}, {"n_bins", 10}}); }) ==
              "params.bin_width_ps");
        CHECK(field_of([&] { h->run_measurement(t, pair, "coincidence", {{"window_ps", 2000}}); }) ==
              "params.background_offset_ps");
        CHECK(field_of([&] { h->run_measurement(t, pair, "count_rate", {{"duration_s", 121}}); }) ==
              "params.duration_s");
        CHECK(field_of([&] { h->run_measurement(t, pair, "spectrum", json::object()); }) == "function");
        CHECK(field_of([&] { h->run_measurement(t, pair, "counter", {{"bin_width_ps", "x"}, {"n_bins", 1}}); }) ==
              "params.bin_width_ps");
        CHECK(code_of([&] { h->run_measurement(h.tokens[1], pair, "count_rate", json::object()); }) ==
              ErrorCode::forbidden);
        CHECK(code_of([&] { h->run_measurement(t, 42, "count_rate", json::object()); }) == ErrorCode::not_found);
        h->release_pair(t, pair);
        CHECK(code_of([&] { h->run_measurement(t, pair, "count_rate", json::object()); }) == ErrorCode::forbidden);
    }
}

TEST_CASE("stub backend is unavailable") {
    auto cfg = config_for(1);
    cfg.backend = BackendKind::stub;
    Harness h(cfg);
    h->submit_pair_request(h.tokens[0]);
    h->run_pending();
    PairId pair = 0;
    for (const auto& r : h->resources()) {
        if (r.assignee) {
            pair = r.id;
        }
    }
    CHECK(code_of([&] { h->run_measurement(h.tokens[0], pair, "count_rate", json::object()); }) ==
          ErrorCode::unavailable);
}

TEST_CASE("notification retries then dead-letters") {
    SUBCASE("transient failure recovers") {
        Harness h(config_for(1), 2);
        const auto r = h->submit_pair_request(h.tokens[0]);
        h->run_pending();
        const auto s = h->request_status(h.tokens[0], r.id);
        CHECK(s.status == RequestStatus::completed);
        CHECK_FALSE(s.delivery_failed);
        CHECK(s.delivery_attempts == 3);
    }
    SUBCASE("permanent failure") {
        Harness h(config_for(1), 1000);
        const double t0 = h.clock->now();
        const auto r = h->submit_pair_request(h.tokens[0]);
        h->run_pending();
        const auto s = h->request_status(h.tokens[0], r.id);
        CHECK(s.status == RequestStatus::completed);
        CHECK(s.delivery_failed);
        CHECK(s.delivery_attempts == 5);
        CHECK(h.sink->attempts == 5);
        // backoff 0.2, 0.4, 0.8, 1.6 s between the five attempts
        CHECK(h.clock->now() - t0 == doctest::Approx(3.0));
        CHECK(h->snapshot()["dead_letters"] == 1);
        const auto audit = audit_journal(h->journal_entries());
        CHECK(audit.delivery_failed == 1);
    }
}

TEST_CASE("webhook sink against a live endpoint") {
    httplib::Server hook;
    std::atomic<int> hits{0};
    hook.Post("/hook", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        CHECK(json::parse(req.body)["event"] == "pair_assigned");
        res.status = 200;
    });
    const int port = hook.bind_to_any_port("127.0.0.1");
    std::thread th([&] { hook.listen_after_bind(); });
    hook.wait_until_ready();

    auto cfg = config_for(1);
    cfg.notification.sink = SinkKind::webhook;
    cfg.notification.webhook_url = "http://127.0.0.1:" + std::to_string(port) + "/hook";
    {
        ServiceDeps deps;
        deps.clock = std::make_shared<ManualClock>();
        Service svc(cfg, std::move(deps));
        const auto tok = svc.login("user0", "pw0").token;
        const auto r = svc.submit_pair_request(tok);
        svc.run_pending();
        CHECK(svc.request_status(tok, r.id).status == RequestStatus::completed);
        CHECK_FALSE(svc.request_status(tok, r.id).delivery_failed);
        CHECK(hits == 1);
    }
    hook.stop();
    th.join();

    // nothing listens there any more
    cfg.notification.request_timeout_s = 0.2;
    ServiceDeps deps;
    deps.clock = std::make_shared<ManualClock>();
    Service svc(cfg, std::move(deps));
    const auto tok = svc.login("user0", "pw0").token;
    const auto r = svc.submit_pair_request(tok);
    svc.run_pending();
    const auto s = svc.request_status(tok, r.id);
    CHECK(s.status == RequestStatus::completed);
    CHECK(s.delivery_failed);
    CHECK(s.delivery_attempts == 5);
}

TEST_CASE("restart replays the journal into identical state") {
    const auto dir = temp_dir("replay");
    const auto path = dir / "journal.jsonl";
    auto cfg = config_for(6, Policy::hungarian);
    json before;
    {
        Harness h(cfg, 0, std::make_unique<FileJournal>(path));
        for (std::size_t i = 0; i < h.tokens.size(); ++i) {
            h->submit_pair_request(h.tokens[i]);
            h.clock->advance(0.3);
            if (i == 1) {
                h->run_allocation_cycle(); // assigned, notification still pending
            }
        }
        h->run_allocation_cycle();
        const auto some = h->resources()[0];
        h->run_measurement(h.tokens[std::stoi(some.assignee->substr(4))], some.id, "coincidence",
                           {{"duration_s", 0.2}});
        before = h->snapshot();
        // killed here: no stop, no flush beyond what append already did
    }
    CHECK(before["requests"].size() == 7);

    {
        Harness h(cfg, 0, std::make_unique<FileJournal>(path));
        CHECK(h->snapshot() == before);
        // queued users are still queued; pending notifications are redelivered
        h->run_pending();
        const auto audit = audit_journal(h->journal_entries());
        CHECK(audit.injective);
        CHECK(audit.assignments == 3);
        CHECK(audit.completed == 3);
    }

    // torn final write on top
    {
        std::ofstream(path, std::ios::app) << R"({"type":"assign","at":)";
    }
    {
        Harness h(cfg, 0, std::make_unique<FileJournal>(path));
        CHECK(h->snapshot()["requests"].size() == 7);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("crash between assignment and acknowledgement does not double-assign") {
    // fails the Nth append, standing in for a crash mid-cycle
    class CrashingJournal final : public Journal {
    public:
        CrashingJournal(std::filesystem::path p, std::uint64_t crash_at) : inner_(std::move(p)), crash_at_(crash_at) {}
        std::uint64_t append(json e) override {
            if (inner_.entries().size() + 1 == crash_at_) {
                throw std::runtime_error("simulated crash");
            }
            return inner_.append(std::move(e));
        }
        std::vector<json> entries() const override { return inner_.entries(); }

    private:
        FileJournal inner_;
        std::uint64_t crash_at_;
    };

    const auto dir = temp_dir("crash");
    const auto path = dir / "journal.jsonl";
    auto cfg = config_for(4);
    {
        // entries 1-4: requests; 5-7: assignments; 8 would be the worker ack
        Harness h(cfg, 0, std::make_unique<CrashingJournal>(path, 8));
        for (const auto& t : h.tokens) {
            h->submit_pair_request(t);
        }
        CHECK_THROWS(h->run_allocation_cycle());
    }
    Harness h(cfg, 0, std::make_unique<FileJournal>(path));
    CHECK(h->journal_entries().size() == 7);
    h->run_pending(); // user_request events are redelivered
    const auto audit = audit_journal(h->journal_entries());
    CHECK(audit.injective);
    CHECK(audit.assignments == 3);
    CHECK(audit.completed == 3);
    std::filesystem::remove_all(dir);
}

TEST_CASE("concurrent handlers keep assignments injective") {
    auto cfg = config_for(30, Policy::hungarian);
    ServiceDeps deps;
    deps.sink = std::make_unique<RecordingSink>();
    Service svc(cfg, std::move(deps));
    svc.start();
    std::atomic<int> completed{0};
    std::vector<std::thread> clients;
    for (int i = 0; i < 30; ++i) {
        clients.emplace_back([&, i] {
            const auto tok = svc.login("user" + std::to_string(i), "pw" + std::to_string(i)).token;
            for (int round = 0; round < 3; ++round) {
                const auto id = svc.submit_pair_request(tok).id;
                for (int spin = 0; spin < 20000; ++spin) {
                    const auto r = svc.request_status(tok, id);
                    if (r.status == RequestStatus::completed) {
                        ++completed;
                        svc.release_pair(tok, *r.pair_id);
                        break;
                    }
                    std::this_thread::sleep_for(std::chrono::milliseconds(1));
                }
            }
        });
    }
    for (auto& c : clients) {
        c.join();
    }
    svc.stop();
    CHECK(completed == 90);
    const auto audit = audit_journal(svc.journal_entries());
    CHECK(audit.injective);
    CHECK(audit.statuses_monotone);
    CHECK(audit.pair_requests == 90);
    CHECK(audit.completed == 90);
    CHECK(audit.max_concurrent <= 3);
}

TEST_CASE("audit flags double assignment") {
    std::vector<json> log{
        {{"type", "request"}, {"request_id", "a"}},
        {{"type", "request"}, {"request_id", "b"}},
        {{"type", "assign"}, {"pair", 1}, {"user", "x"}, {"request_id", "a"}},
        {{"type", "assign"}, {"pair", 1}, {"user", "y"}, {"request_id", "b"}},
    };
    const auto a = audit_journal(log);
    CHECK_FALSE(a.injective);
    CHECK(a.violation.find("pair 1") != std::string::npos);
}

TEST_CASE("HTTP API") {
    auto cfg = config_for(2);
    Service svc(cfg, ServiceDeps{nullptr, nullptr, std::make_unique<RecordingSink>(), nullptr});
    svc.start();
    HttpServer http(svc, 8);
    const int port = http.bind("127.0.0.1", 0);
    http.start();
    httplib::Client c("127.0.0.1", port);

    auto res = c.Get("/api/v1/healthz");
    REQUIRE(res);
    CHECK(res->status == 200);

    res = c.Post("/api/v1/auth/login", R"({"user":"user0","secret":"nope"})", "application/json");
    CHECK(res->status == 401);
    CHECK(json::parse(res->body)["code"] == "unauthorized");

    res = c.Post("/api/v1/auth/login", R"({"user":"user0"})", "application/json");
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["field"] == "secret");

    res = c.Post("/api/v1/auth/login", "{not json", "application/json");
    CHECK(res->status == 400);

    res = c.Post("/api/v1/auth/login", R"({"user":"user0","secret":"pw0"})", "application/json");
    REQUIRE(res->status == 200);
    const auto token = json::parse(res->body)["token"].get<std::string>();
    const httplib::Headers auth{{"Authorization", "Bearer " + token}};

    CHECK(c.Get("/api/v1/resources")->status == 401);

    res = c.Get("/api/v1/queue/position", auth);
    CHECK(json::parse(res->body)["position"].is_null());

    res = c.Post("/api/v1/pair-requests", auth, "", "application/json");
    REQUIRE(res->status == 202);
    const auto sub = json::parse(res->body);
    CHECK(sub["status"] == "processing");
    const auto id = sub["request_id"].get<std::string>();

    json rec;
    for (int i = 0; i < 500; ++i) {
        rec = json::parse(c.Get("/api/v1/pair-requests/" + id, auth)->body);
        if (rec["status"] == "completed") {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    REQUIRE(rec["status"] == "completed");
    const int pair = rec["pair_id"].get<int>();

    res = c.Post("/api/v1/pair-requests", auth, "", "application/json");
    CHECK(res->status == 409);
    CHECK(json::parse(res->body)["code"] == "conflict");

    res = c.Get("/api/v1/resources", auth);
    const auto listed = json::parse(res->body);
    int assigned = 0;
    for (const auto& r : listed["resources"]) {
        assigned += r["status"]["state"] == "assigned" ? 1 : 0;
    }
    CHECK(assigned == 1);

    res = c.Post("/api/v1/measurements", auth,
                 json{{"pair_id", pair}, {"function", "counter"}, {"params", {{"bin_width_ps", 100}, {"n_bins", 100}}}}
                     .dump(),
                 "application/json");
    REQUIRE(res->status == 200);
    CHECK(json::parse(res->body)["counts"].size() == 100);

    res = c.Post("/api/v1/measurements", auth, json{{"pair_id", pair}, {"function", "counter"}}.dump(),
                 "application/json");
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["field"] == "params.bin_width_ps");

    CHECK(c.Get("/api/v1/pair-requests/req-999999", auth)->status == 404);
    CHECK(c.Post("/api/v1/pairs/7/release", auth, "", "application/json")->status == 404);
    CHECK(c.Post("/api/v1/pairs/x/release", auth, "", "application/json")->status == 400);

    res = c.Post("/api/v1/pairs/" + std::to_string(pair) + "/release", auth, "", "application/json");
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["released"] == true);
    res = c.Post("/api/v1/pairs/" + std::to_string(pair) + "/release", auth, "", "application/json");
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["released"] == false);

    res = c.Get("/api/v1/nowhere");
    CHECK(res->status == 404);
    CHECK(json::parse(res->body)["code"] == "not_found");

    http.stop();
    svc.stop();
}

TEST_CASE("bench clients against a live server") {
    auto cfg = config_for(0);
    for (int i = 0; i < 8; ++i) {
        cfg.users["bench-" + std::to_string(i)] = "bench";
    }
    Service svc(cfg, ServiceDeps{nullptr, nullptr, std::make_unique<RecordingSink>(), nullptr});
    svc.start();
    HttpServer http(svc, 16);
    const int port = http.bind("127.0.0.1", 0);
    http.start();

    BenchOptions o;
    o.url = "http://127.0.0.1:" + std::to_string(port);
    o.users = 8;
    o.duration_s = 1.5;
    o.poll_ms = 20;
    o.interarrival_ms_low = 10;
    o.interarrival_ms_high = 50;
    const auto report = run_bench(o);
    http.stop();
    svc.stop();

    CHECK(report.requests > 8);
    CHECK(report.lost == 0);
    CHECK(report.failures == 0);
    CHECK(report.completed == report.requests);
    CHECK(report.measurements == report.completed);
    const auto audit = audit_journal(svc.journal_entries());
    CHECK(audit.injective);
    CHECK(audit.pair_requests == static_cast<std::size_t>(report.requests));
    CHECK(to_json(report)["latency_ms"]["p50"].get<double>() > 0.0);
}
