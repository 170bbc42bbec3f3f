#include "vqn/error.hpp"
#include "vqn/simulation.hpp"

#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace vqn;
using namespace vqn::sim;

TEST_CASE("no arrivals give empty metrics") {
    SimConfig c;
    c.mean_interarrival = std::numeric_limits<double>::infinity();
    const auto m = run_once(c, 1);
    CHECK(m.throughput == 0);
    CHECK(m.arrivals == 0);
    CHECK(m.avg_wait == 0.0);
    CHECK(m.avg_qos == 0.0);
    CHECK(m.assignments.empty());
    REQUIRE_FALSE(m.queue_length_series.empty());
    CHECK(m.queue_length_series.front() == TimePoint{0.0, 0});
}

TEST_CASE("a lone user never waits and sees its pair's rate") {
    SimConfig c;
    c.n_users = 1;
    c.n_resources = 3;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto m = run_once(c, seed);
        REQUIRE(m.arrivals > 0);
        CHECK(m.avg_wait == 0.0);
        REQUIRE(m.per_user_qos.size() == 1);
        // with three free pairs the allocator picks the fastest every time
        const double fastest = *std::max_element(m.resource_rates.begin(), m.resource_rates.end());
        CHECK(m.per_user_qos[0] == doctest::Approx(fastest));
        CHECK(m.fairness == doctest::Approx(1.0));
    }
}

TEST_CASE("conservation and queue invariants") {
    for (auto model : {ArrivalModel::closed, ArrivalModel::open}) {
        for (auto policy : {Policy::hungarian, Policy::fcfs}) {
            SimConfig c;
            c.arrival_model = model;
            c.policy = policy;
            c.n_resources = 3;
            for (std::uint64_t seed = 1; seed <= 10; ++seed) {
                const auto m = run_once(c, seed);
                CHECK(m.arrivals == m.throughput + m.in_service + m.queued);
                CHECK(m.in_service <= c.n_resources);
                std::int64_t last = -1;
                for (const auto& p : m.cumulative_throughput_series) {
                    REQUIRE(p.value >= last);
                    last = p.value;
                }
                CHECK(last == m.throughput);
                for (const auto& p : m.queue_length_series) {
                    REQUIRE(p.value >= 0);
                    if (model == ArrivalModel::closed) {
                        REQUIRE(p.value <= c.n_users);
                    }
                }
                CHECK(m.fairness >= 0.0);
                CHECK(m.fairness <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("runs are deterministic per seed and independent of threads") {
    SimConfig c;
    const auto a = run_once(c, 17);
    const auto b = run_once(c, 17);
    CHECK(a.assignments == b.assignments);
    CHECK(a.queue_length_series == b.queue_length_series);
    CHECK(a.per_user_qos == b.per_user_qos);
    CHECK_FALSE(run_once(c, 18).assignments == a.assignments);

    c.repetitions = 4;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto serial = run(c);
    omp_set_num_threads(4);
    const auto threaded = run(c);
    omp_set_num_threads(saved);
    CHECK(to_json(serial).dump() == to_json(threaded).dump());
    // repetitions use distinct sub-seeds
    CHECK_FALSE(serial.repetitions[0].assignments == serial.repetitions[1].assignments);
}

TEST_CASE("Little's law at steady state") {
    // L = lambda * W over the queue; lambda counted from arrivals
    for (auto model : {ArrivalModel::closed, ArrivalModel::open}) {
        SimConfig c;
        c.arrival_model = model;
        c.duration = 20000.0;
        c.n_resources = 6;
        c.mean_interarrival = model == ArrivalModel::open ? 12.0 : 10.0;
        const auto m = run_once(c, 3);
        const double lambda = static_cast<double>(m.arrivals) / c.duration;
        const double predicted = lambda * m.avg_wait;
        CAPTURE(static_cast<int>(model));
        CHECK(m.avg_queue_length > 0.0);
        CHECK(std::abs(m.avg_queue_length - predicted) <= 0.2 * m.avg_queue_length);
    }
}

TEST_CASE("sweeps agree with run") {
    SimConfig c;
    c.n_resources = 4;
    c.duration = 300.0;
    const auto rows = sweep_users(c, {7});
    REQUIRE(rows.size() == 1);
    auto single = c;
    single.n_users = 7;
    const auto direct = run(single).mean;
    CHECK(rows[0].users == 7);
    CHECK(rows[0].resources == 4);
    CHECK(rows[0].metrics.avg_wait == direct.avg_wait);
    CHECK(rows[0].metrics.fairness == direct.fairness);

    const auto res = sweep_resources(c, {2, 5});
    REQUIRE(res.size() == 2);
    CHECK(res[1].resources == 5);
    CHECK(res[1].users == c.n_users);

    CHECK_THROWS_AS(sweep_users(c, {0}), Error);
}

TEST_CASE("light load and ample resources mean no waiting") {
    SimConfig c;
    c.n_users = 5;
    c.n_resources = 5;
    const auto m = run(c).mean;
    CHECK(m.avg_wait == 0.0);
}

TEST_CASE("compare_policies") {
    SUBCASE("one resource and one requester leave no choice") {
        SimConfig c;
        c.n_resources = 1;
        c.n_users = 1;
        const auto cmp = compare_policies(c);
        REQUIRE(cmp.hungarian.repetitions.size() == cmp.fcfs.repetitions.size());
        for (std::size_t r = 0; r < cmp.fcfs.repetitions.size(); ++r) {
            CHECK(cmp.hungarian.repetitions[r].assignments == cmp.fcfs.repetitions[r].assignments);
        }
    }
    SUBCASE("ample capacity completes the same arrivals") {
        SimConfig c;
        c.n_resources = c.n_users;
        const auto cmp = compare_policies(c);
        for (std::size_t r = 0; r < cmp.fcfs.repetitions.size(); ++r) {
            CHECK(cmp.hungarian.repetitions[r].arrivals == cmp.fcfs.repetitions[r].arrivals);
            CHECK(cmp.hungarian.repetitions[r].throughput == cmp.fcfs.repetitions[r].throughput);
        }
    }
}

TEST_CASE("presets and config parsing") {
    CHECK(preset("fig5").config.n_resources == 25);
    CHECK(preset("fig6").config.n_users == 20);
    CHECK(preset("fig7").config.repetitions == 1);
    CHECK_THROWS_AS(preset("fig8"), Error);

    const auto j = nlohmann::json::parse(R"({"n_resources": 4, "rate_range_hz": [100, 200],
        "policy": "fcfs", "seed": 9, "arrival_model": "open"})");
    const auto c = j.get<SimConfig>();
    CHECK(c.n_resources == 4);
    CHECK(c.rate_low_hz == 100.0);
    CHECK(c.rate_high_hz == 200.0);
    CHECK(c.policy == Policy::fcfs);
    CHECK(c.seed == 9u);
    CHECK(c.arrival_model == ArrivalModel::open);
    CHECK(c.mean_service == 60.0);

    SimConfig bad;
    bad.rate_low_hz = 70000.0;
    CHECK_THROWS_AS(run(bad), Error);
    bad = SimConfig{};
    bad.repetitions = 0;
    CHECK_THROWS_AS(run(bad), Error);
}

TEST_CASE("sweep CSV layout") {
    std::ostringstream out;
    write_sweep_csv(out, {SweepRow{10, 25, SimSummary{1.5, 2.0, 0.9, 0.1, 33.0}}});
    CHECK(out.str() == "load,resources,avg_wait,avg_qos,fairness,throughput\n10,25,1.5,2,0.9,33\n");
}
