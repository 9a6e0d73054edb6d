#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "wagglenet/sim/latency.hpp"
#include "wagglenet/sim/scheduler.hpp"
#include "wagglenet/sim/simulation.hpp"

using namespace wagglenet;
using Catch::Matchers::WithinAbs;

namespace {

NodeConfig hive_node(const std::string& id, double distance_m, int wall_pairs,
                     double offset_s) {
    NodeConfig n;
    n.node_id = id;
    n.role = wall_pairs > 0 ? NodeRole::internal(wall_pairs) : NodeRole::external();
    n.distance_to_gateway_m = distance_m;
    n.start_offset_s = offset_s;
    n.position = {37.8716, -122.2728, 52.0};
    return n;
}

sim::SimulationConfig base_config(const std::string& name, double duration_s) {
    sim::SimulationConfig c;
    c.name = name;
    c.duration_s = duration_s;
    c.seed = 42;
    c.channel = rf::ChannelParams::urban();
    return c;
}

const sim::NodeReport& node_report(const sim::MetricsReport& report, const std::string& id) {
    for (const auto& n : report.nodes)
        if (n.node_id == id) return n;
    FAIL("no report for node " + id);
    static sim::NodeReport none;
    return none;
}

}  // namespace

TEST_CASE("event queue fires in time order with stable ties", "[engine]") {
    sim::EventQueue q;
    std::vector<int> order;
    q.schedule(2.0, [&](double) { order.push_back(3); });
    q.schedule(1.0, [&](double) { order.push_back(1); });
    q.schedule(1.0, [&](double) { order.push_back(2); });  // same time, inserted later
    q.schedule(3.0, [&](double) { order.push_back(4); });

    q.run_until(2.5);
    CHECK(order == std::vector<int>{1, 2, 3});
    CHECK_THAT(q.now(), WithinAbs(2.5, 0.0));  // clock parks at the horizon
    CHECK(q.processed() == 3);
    CHECK_FALSE(q.empty());

    q.run_until(10.0);
    CHECK(order == std::vector<int>{1, 2, 3, 4});
    CHECK(q.empty());
    CHECK_THAT(q.now(), WithinAbs(10.0, 0.0));
}

TEST_CASE("events cannot be scheduled in the past", "[engine]") {
    sim::EventQueue q;
    q.schedule(5.0, [](double) {});
    q.run_next();
    CHECK_THAT(q.now(), WithinAbs(5.0, 0.0));
    CHECK_THROWS_AS(q.schedule(4.999, [](double) {}), std::logic_error);
    q.schedule(5.0, [](double) {});  // same instant is allowed
    CHECK(q.run_next());
    CHECK_FALSE(q.run_next());
}

TEST_CASE("handlers may schedule follow-up events at the current time", "[engine]") {
    sim::EventQueue q;
    int chained = 0;
    q.schedule(1.0, [&](double now) {
        q.schedule(now, [&](double) { ++chained; });
        q.schedule(now + 1.0, [&](double) { ++chained; });
    });
    q.run_until(3.0);
    CHECK(chained == 2);
    CHECK(q.processed() == 3);
}

TEST_CASE("jitter components stay inside their band and above zero", "[engine]") {
    std::mt19937_64 rng(7);

    const sim::JitterComponent fixed{0.05, 0.0};
    for (int i = 0; i < 10; ++i) CHECK_THAT(fixed.sample(rng), WithinAbs(0.05, 0.0));

    const sim::JitterComponent banded{0.3, 0.2};
    for (int i = 0; i < 2000; ++i) {
        const double v = banded.sample(rng);
        REQUIRE(v >= 0.1);
        REQUIRE(v <= 0.5);
    }

    const sim::JitterComponent clamped{0.1, 0.5};  // band dips below zero
    bool saw_zero_floor = false;
    for (int i = 0; i < 2000; ++i) {
        const double v = clamped.sample(rng);
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 0.6);
        saw_zero_floor = saw_zero_floor || v == 0.0;
    }
    CHECK(saw_zero_floor);
}

TEST_CASE("latency statistics match hand-computed values", "[engine]") {
    const std::vector<double> values{1.0, 2.0, 3.0, 4.0};
    const auto stats = sim::latency_stats(values.begin(), values.end());
    CHECK(stats.count == 4);
    CHECK_THAT(stats.mean_s, WithinAbs(2.5, 1e-12));
    CHECK_THAT(stats.stddev_s, WithinAbs(std::sqrt(5.0 / 3.0), 1e-12));  // sample stddev
    CHECK_THAT(stats.min_s, WithinAbs(1.0, 0.0));
    CHECK_THAT(stats.max_s, WithinAbs(4.0, 0.0));

    const std::vector<double> one{7.0};
    const auto single = sim::latency_stats(one.begin(), one.end());
    CHECK(single.count == 1);
    CHECK_THAT(single.stddev_s, WithinAbs(0.0, 0.0));
    CHECK_THAT(single.min_s, WithinAbs(7.0, 0.0));

    const std::vector<double> none;
    CHECK(sim::latency_stats(none.begin(), none.end()).count == 0);
}

TEST_CASE("identical seeds reproduce runs byte for byte", "[engine]") {
    const auto config = [] {
        auto c = base_config("repro", 600.0);
        c.nodes.push_back(hive_node("hive1-brood", 30.0, 2, 0.0));
        c.nodes.push_back(hive_node("hive1-roof", 45.0, 2, 60.0));
        return c;
    }();

    const auto first = sim::Simulation(config).run();
    const auto second = sim::Simulation(config).run();
    CHECK(first.report.to_json_string() == second.report.to_json_string());
    CHECK(sim::readings_csv(first.readings) == sim::readings_csv(second.readings));

    auto reseeded = config;
    reseeded.seed = 43;
    const auto third = sim::Simulation(reseeded).run();
    CHECK(sim::readings_csv(third.readings) != sim::readings_csv(first.readings));
}

TEST_CASE("every packet is accounted for across loss modes", "[engine]") {
    auto config = base_config("mixed-loss", 1800.0);
    // The twins share a phase and a stretched 1.8 s frame, so every attempt
    // pair overlaps; the far node is beyond any plausible shadowing rescue.
    config.air.fixed_airtime_override_s = 1.8;
    config.nodes.push_back(hive_node("twin-a", 30.0, 2, 0.0));
    config.nodes.push_back(hive_node("twin-b", 30.0, 2, 0.0));
    config.nodes.push_back(hive_node("near", 30.0, 2, 60.0));
    config.nodes.push_back(hive_node("far", 250.0, 0, 90.0));

    const auto result = sim::Simulation(config).run();
    const auto& report = result.report;

    CHECK(report.packets_sent == 40);  // 10 cycles for each of 4 nodes
    CHECK(report.packets_sent == report.delivered + report.lost_range +
                                     report.lost_collision + report.rejected +
                                     report.in_flight);
    CHECK(report.conservation_ok);
    CHECK(report.in_flight == 0);
    CHECK(report.rejected == 0);
    CHECK(report.latency_identity_violations == 0);

    CHECK(node_report(report, "near").delivered == 10);
    CHECK(node_report(report, "far").lost_range == 10);
    CHECK(node_report(report, "twin-a").lost_collision == 10);
    CHECK(node_report(report, "twin-b").lost_collision == 10);
    CHECK(node_report(report, "twin-a").attempts_total == 30);  // retries exhausted

    for (const auto& rec : result.readings) {
        if (rec.node_id == "far") CHECK(rec.rssi_dbm < -100.0);
        if (rec.node_id == "near") CHECK(rec.status == sim::ReadingStatus::Delivered);
    }
}

TEST_CASE("a backhaul outage delays readings without losing them", "[engine]") {
    auto config = base_config("outage", 1800.0);
    config.nodes.push_back(hive_node("out-a", 25.0, 2, 0.0));
    config.nodes.push_back(hive_node("out-b", 35.0, 2, 60.0));
    config.nodes.push_back(hive_node("out-c", 45.0, 2, 120.0));
    config.outage.start_s = 600.0;
    config.outage.duration_s = 90.0;

    const auto result = sim::Simulation(config).run();
    const auto& report = result.report;

    CHECK(report.packets_sent == 30);
    CHECK(report.delivered == 30);  // the cache absorbs the outage entirely
    CHECK(report.lost_range + report.lost_collision + report.rejected == 0);
    CHECK(report.conservation_ok);
    CHECK(report.latency_identity_violations == 0);
    CHECK(report.gateway.cache_evictions == 0);
    CHECK(report.gateway.cache_size_at_end == 0);
    CHECK(report.broker.resends == 0);
    CHECK(report.cloud.duplicates == 0);

    // samples at 600 and 660 land inside the 600..690 window
    int cached = 0;
    for (const auto& rec : result.readings) {
        if (rec.cached_at_s < 0.0) continue;
        ++cached;
        CHECK(rec.latency.queue_wait_s > 0.0);
        // flushed by the first 30 s retry tick after restoration
        CHECK(rec.delivered_at_s >= 690.0);
        CHECK(rec.delivered_at_s <= 690.0 + 60.0);
    }
    CHECK(cached == 2);
}

TEST_CASE("dropped acks cause redelivery, not double counting", "[engine]") {
    auto config = base_config("ack-loss", 360.0);
    config.nodes.push_back(hive_node("hive1-brood", 30.0, 2, 0.0));
    config.drop_first_acks = 2;

    sim::Simulation simulation(config);
    const auto result = simulation.run();
    const auto& report = result.report;

    CHECK(report.packets_sent == 2);
    CHECK(report.delivered == 2);
    CHECK(report.in_flight == 0);
    CHECK(report.conservation_ok);
    CHECK(report.cloud.duplicates == 2);  // each resend re-ingested and deduped
    CHECK(report.cloud.ingested == 2);
    CHECK(report.broker.publishes_received == 4);
    CHECK(simulation.store().reading_count() == 2);
}

TEST_CASE("a sustained temperature excursion raises one critical alert", "[engine]") {
    auto config = base_config("excursion", 3600.0);
    config.nodes.push_back(hive_node("hive1-brood", 30.0, 2, 0.0));
    sim::ExcursionInjection inj;
    inj.node_id = "hive1-brood";
    inj.start_s = 600.0;
    inj.duration_s = 1200.0;
    inj.temperature_c = 38.2;
    config.excursions.push_back(inj);

    const auto result = sim::Simulation(config).run();
    const auto& report = result.report;

    CHECK(report.delivered == report.packets_sent);
    REQUIRE(report.alerts.size() == 1);
    const auto& alert = report.alerts[0];
    CHECK(alert.node_id == "hive1-brood");
    CHECK(alert.parameter == "temperature");
    CHECK(alert.tier == "critical");
    CHECK_THAT(alert.value, WithinAbs(38.2, 1e-6));
    CHECK_THAT(alert.threshold_violated, WithinAbs(38.0, 1e-9));
    CHECK(alert.confirm_sample_ts - alert.first_sample_ts == 180);  // debounce pair
    // samples land on the 180 s grid, so the first one inside the
    // excursion window [600, 1800) is at t = 720
    CHECK(alert.first_sample_ts == 1722780720);
    CHECK(alert.sink == "recorder");
    CHECK(alert.delivered);
    CHECK(alert.dispatch_latency_s > 0.0);
    CHECK(alert.dispatch_latency_s < 5.0);
    CHECK(report.cloud.alerts_emitted == 1);
}

TEST_CASE("gateway range rejection is visible end to end", "[engine]") {
    auto config = base_config("reject", 540.0);
    config.nodes.push_back(hive_node("hive1-brood", 30.0, 2, 0.0));
    config.gateway.temperature_max_c = 30.0;  // brood runs ~33 C, all out of range

    const auto result = sim::Simulation(config).run();
    const auto& report = result.report;

    CHECK(report.packets_sent == 3);
    CHECK(report.rejected == 3);
    CHECK(report.delivered == 0);
    CHECK(report.conservation_ok);
    CHECK(report.gateway.rejected_out_of_range == 3);
    CHECK(report.gateway.accepted == 0);
    CHECK(report.cloud.ingested == 0);
    for (const auto& rec : result.readings)
        CHECK(rec.status == sim::ReadingStatus::Rejected);
}

TEST_CASE("bad run configurations are refused up front", "[engine]") {
    SECTION("no nodes") {
        const auto config = base_config("empty", 100.0);
        CHECK_THROWS_AS(sim::Simulation(config), sim::ConfigError);
    }
    SECTION("excursion for an unknown node") {
        auto config = base_config("ghost", 100.0);
        config.nodes.push_back(hive_node("real", 30.0, 2, 0.0));
        sim::ExcursionInjection inj;
        inj.node_id = "ghost";
        config.excursions.push_back(inj);
        CHECK_THROWS_AS(sim::Simulation(config), sim::ConfigError);
    }
    SECTION("channel below the free-space floor") {
        auto config = base_config("channel", 100.0);
        config.nodes.push_back(hive_node("real", 30.0, 2, 0.0));
        config.channel.path_loss_exponent = 1.0;
        CHECK_THROWS_AS(sim::Simulation(config), sim::ConfigError);
    }
    SECTION("node without a transmit attempt") {
        auto config = base_config("retries", 100.0);
        config.nodes.push_back(hive_node("real", 30.0, 2, 0.0));
        config.nodes[0].max_tx_retries = 0;
        CHECK_THROWS_AS(sim::Simulation(config), sim::ConfigError);
    }
}
