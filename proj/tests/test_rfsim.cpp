#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "wagglenet/rfsim.hpp"

using namespace wagglenet;
using Catch::Matchers::WithinAbs;

namespace {

rf::TransmissionEvent at_distance(double d, int obstructions = 0) {
    rf::TransmissionEvent e;
    e.distance_m = d;
    e.obstructions = obstructions;
    return e;
}

/// Normal CDF, used as the independent model of shadowed delivery.
double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Reference collision semantics: connected components of the pairwise
/// interval-overlap graph; every member of a component of size >= 2 is lost.
std::set<std::size_t> brute_force_collisions(const std::vector<rf::TransmissionEvent>& ev) {
    const std::size_t n = ev.size();
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    const auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (ev[i].start_time_s < ev[j].end_time_s() &&
                ev[j].start_time_s < ev[i].end_time_s())
                parent[find(i)] = find(j);
    std::vector<int> size(n, 0);
    for (std::size_t i = 0; i < n; ++i) ++size[find(i)];
    std::set<std::size_t> lost;
    for (std::size_t i = 0; i < n; ++i)
        if (size[find(i)] > 1) lost.insert(i);
    return lost;
}

}  // namespace

TEST_CASE("free-space reference loss at 915 MHz", "[rfsim]") {
    CHECK_THAT(rf::free_space_loss_db(1.0, 915e6), WithinAbs(31.676205, 1e-4));
    // 20 dB per decade of distance
    CHECK_THAT(rf::free_space_loss_db(10.0, 915e6) - rf::free_space_loss_db(1.0, 915e6),
               WithinAbs(20.0, 1e-9));
}

TEST_CASE("presets calibrate the exponent to the anchor loss", "[rfsim]") {
    const auto urban = rf::ChannelParams::urban();
    const auto rural = rf::ChannelParams::rural();
    CHECK_THAT(urban.path_loss_exponent, WithinAbs(4.058828, 1e-5));
    CHECK_THAT(rural.path_loss_exponent, WithinAbs(3.875012, 1e-5));
    CHECK_THAT(rf::path_loss_db(150.0, urban), WithinAbs(120.0, 1e-9));
    CHECK_THAT(rf::path_loss_db(150.0, rural), WithinAbs(116.0, 1e-9));
    CHECK_THAT(urban.shadowing_sigma_db, WithinAbs(1.4, 1e-12));
    CHECK_THAT(rural.shadowing_sigma_db, WithinAbs(0.0, 1e-12));
}

TEST_CASE("link budget at the anchor distance", "[rfsim]") {
    const auto urban = rf::ChannelParams::urban();
    const auto rural = rf::ChannelParams::rural();

    const double urban_rssi = rf::received_power_dbm(at_distance(150.0), urban, 0.0);
    CHECK_THAT(urban_rssi, WithinAbs(-103.0, 0.1));
    CHECK_FALSE(rf::delivery_outcome(urban_rssi, urban));

    const double rural_rssi = rf::received_power_dbm(at_distance(150.0), rural, 0.0);
    CHECK_THAT(rural_rssi, WithinAbs(-99.0, 0.1));
    CHECK(rf::delivery_outcome(rural_rssi, rural));

    // exactly at the sensitivity floor still counts as delivered
    CHECK(rf::delivery_outcome(urban.sensitivity_dbm, urban));
    CHECK_FALSE(rf::delivery_outcome(urban.sensitivity_dbm - 1e-9, urban));
}

TEST_CASE("obstruction losses stack per wall pair", "[rfsim]") {
    const auto urban = rf::ChannelParams::urban();
    const double clear = rf::received_power_dbm(at_distance(40.0), urban, 0.0);
    const double walled = rf::received_power_dbm(at_distance(40.0, 2), urban, 0.0);
    CHECK_THAT(clear - walled, WithinAbs(2 * urban.wall_pair_midpoint_db(), 1e-9));
    CHECK_THAT(urban.wall_pair_midpoint_db(), WithinAbs(4.0, 1e-12));

    // a caller-supplied draw overrides the midpoint
    const double drawn = rf::received_power_dbm(at_distance(40.0, 2), urban, 0.0, 7.25);
    CHECK_THAT(clear - drawn, WithinAbs(7.25, 1e-9));

    // shadowing subtracts directly
    const double shadowed = rf::received_power_dbm(at_distance(40.0), urban, 2.5);
    CHECK_THAT(clear - shadowed, WithinAbs(2.5, 1e-9));
}

TEST_CASE("path loss clamps below the reference distance and grows with it", "[rfsim]") {
    const auto urban = rf::ChannelParams::urban();
    CHECK_THAT(rf::path_loss_db(0.5, urban), WithinAbs(rf::path_loss_db(1.0, urban), 1e-12));
    CHECK(rf::path_loss_db(10.0, urban) < rf::path_loss_db(50.0, urban));
    CHECK(rf::path_loss_db(50.0, urban) < rf::path_loss_db(150.0, urban));
}

TEST_CASE("airtime follows the LoRa symbol arithmetic", "[rfsim]") {
    rf::LoraAirParams p;  // SF7, 125 kHz, CR 4/5, CRC on, explicit header
    CHECK_THAT(rf::airtime_s(200, p), WithinAbs(0.317696, 1e-6));
    CHECK_THAT(rf::airtime_s(193, p), WithinAbs(0.307456, 1e-6));
    CHECK_THAT(rf::airtime_s(51, p), WithinAbs(0.102656, 1e-6));

    // nondecreasing in payload length
    double prev = 0.0;
    for (int n = 1; n <= 255; ++n) {
        const double t = rf::airtime_s(n, p);
        REQUIRE(t >= prev);
        prev = t;
    }

    rf::LoraAirParams sf8 = p;
    sf8.spreading_factor = 8;
    CHECK(rf::airtime_s(200, sf8) > rf::airtime_s(200, p));

    rf::LoraAirParams sf12 = p;
    sf12.spreading_factor = 12;
    rf::LoraAirParams sf12_ldro = sf12;
    sf12_ldro.low_data_rate_optimize = true;
    CHECK_THAT(rf::airtime_s(200, sf12), WithinAbs(6.234112, 1e-6));
    CHECK_THAT(rf::airtime_s(200, sf12_ldro), WithinAbs(7.217152, 1e-6));

    rf::LoraAirParams fixed = p;
    fixed.fixed_airtime_override_s = 1.8;
    CHECK_THAT(rf::airtime_s(5, fixed), WithinAbs(1.8, 1e-12));
    CHECK_THAT(rf::airtime_s(255, fixed), WithinAbs(1.8, 1e-12));

    CHECK_THROWS_AS(rf::airtime_s(0, p), rf::PayloadTooLargeError);
    CHECK_THROWS_AS(rf::airtime_s(256, p), rf::PayloadTooLargeError);
}

TEST_CASE("shadowed delivery matches the normal-tail probability", "[rfsim]") {
    const auto urban = rf::ChannelParams::urban();

    // analytic delivery probabilities, frozen
    const struct { double d, p; } pts[] = {{110.0, 0.96099}, {145.0, 0.04308},
                                           {150.0, 0.01606}};
    for (const auto& pt : pts) {
        const double mean = rf::received_power_dbm(at_distance(pt.d), urban, 0.0);
        const double analytic = phi((mean - urban.sensitivity_dbm) / urban.shadowing_sigma_db);
        CHECK_THAT(analytic, WithinAbs(pt.p, 5e-5));
    }

    // Monte Carlo against the analytic value at the anchor distance
    std::mt19937_64 rng(11);
    std::normal_distribution<double> shadow(0.0, urban.shadowing_sigma_db);
    const int draws = 200000;
    int delivered = 0;
    for (int i = 0; i < draws; ++i) {
        const double rssi = rf::received_power_dbm(at_distance(150.0), urban, shadow(rng));
        if (rf::delivery_outcome(rssi, urban)) ++delivered;
    }
    const double observed = static_cast<double>(delivered) / draws;
    CHECK_THAT(observed, WithinAbs(0.01606, 0.002));  // ~7 standard errors
}

TEST_CASE("collision closed forms", "[rfsim]") {
    CHECK_THAT(rf::collision_probability_exact(1, 1.8, 180.0), WithinAbs(0.0, 1e-12));
    CHECK_THAT(rf::collision_probability_exact(2, 1.8, 180.0), WithinAbs(0.02, 1e-12));
    CHECK_THAT(rf::collision_probability_exact(5, 1.8, 180.0), WithinAbs(0.077632, 1e-6));
    CHECK_THAT(rf::collision_probability_exact(10, 1.8, 180.0), WithinAbs(0.166252, 1e-6));
    CHECK_THAT(rf::collision_probability_exact(20, 1.8, 180.0), WithinAbs(0.318767, 1e-6));

    CHECK_THAT(rf::collision_probability_approx(2, 1.8, 180.0), WithinAbs(0.02, 1e-12));
    CHECK_THAT(rf::collision_probability_approx(5, 1.8, 180.0), WithinAbs(0.05, 1e-12));
    CHECK_THAT(rf::collision_probability_approx(10, 1.8, 180.0), WithinAbs(0.10, 1e-12));
    CHECK_THAT(rf::collision_probability_approx(20, 1.8, 180.0), WithinAbs(0.20, 1e-12));
    CHECK_THAT(rf::collision_probability_approx(200, 1.8, 180.0), WithinAbs(1.0, 1e-12));

    CHECK_THROWS_AS(rf::collision_probability_approx(0, 1.8, 180.0), std::invalid_argument);
    CHECK_THROWS_AS(rf::collision_probability_approx(5, 180.0, 1.8), std::invalid_argument);
    CHECK_THROWS_AS(rf::collision_probability_exact(0, 1.8, 180.0), std::invalid_argument);
}

TEST_CASE("collision clustering loses every overlapping frame", "[rfsim]") {
    const auto ev = [](double start, double airtime) {
        rf::TransmissionEvent e;
        e.start_time_s = start;
        e.airtime_s = airtime;
        return e;
    };

    CHECK(rf::resolve_collisions({}).empty());
    CHECK(rf::resolve_collisions({ev(0, 2)}).empty());

    // plain overlap
    CHECK(rf::resolve_collisions({ev(0, 2), ev(1, 2)}) == std::set<std::size_t>{0, 1});

    // touching intervals do not overlap ([0,2) then [2,4))
    CHECK(rf::resolve_collisions({ev(0, 2), ev(2, 2)}).empty());

    // chained cluster: B bridges A and C even though A and C are disjoint
    CHECK(rf::resolve_collisions({ev(0, 2), ev(1.9, 0.3), ev(2.1, 2)}) ==
          std::set<std::size_t>{0, 1, 2});

    // a long frame swallows two short ones that miss each other
    CHECK(rf::resolve_collisions({ev(0, 10), ev(1, 0.5), ev(5, 0.5)}) ==
          std::set<std::size_t>{0, 1, 2});

    // clear gap splits clusters
    CHECK(rf::resolve_collisions({ev(0, 2), ev(1, 2), ev(10, 2), ev(20, 2), ev(21, 2)}) ==
          std::set<std::size_t>{0, 1, 3, 4});

    CHECK_THROWS_AS(rf::resolve_collisions({ev(5, 1), ev(0, 1)}), std::invalid_argument);
}

TEST_CASE("collision clustering equals the pairwise-overlap closure", "[rfsim]") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> count(2, 12);
    std::uniform_real_distribution<double> start(0.0, 30.0);
    std::uniform_real_distribution<double> airtime(0.1, 5.0);
    for (int trial = 0; trial < 400; ++trial) {
        std::vector<rf::TransmissionEvent> events(static_cast<std::size_t>(count(rng)));
        for (auto& e : events) {
            e.start_time_s = start(rng);
            e.airtime_s = airtime(rng);
        }
        std::sort(events.begin(), events.end(),
                  [](const auto& a, const auto& b) { return a.start_time_s < b.start_time_s; });
        REQUIRE(rf::resolve_collisions(events) == brute_force_collisions(events));
    }
}

TEST_CASE("monte carlo loss approaches the exact probability", "[rfsim]") {
    // 10 periodic transmitters, uniform phases; count losses in the middle
    // period so edge effects cancel.
    const int n = 10;
    const double airtime = 1.8, interval = 180.0;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> phase(0.0, interval);
    const int trials = 4000;
    long lost_mid = 0, total_mid = 0;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<rf::TransmissionEvent> events;
        events.reserve(3 * n);
        for (int i = 0; i < n; ++i) {
            const double p = phase(rng);
            for (int rep = 0; rep < 3; ++rep) {
                rf::TransmissionEvent e;
                e.start_time_s = p + rep * interval;
                e.airtime_s = airtime;
                events.push_back(e);
            }
        }
        std::sort(events.begin(), events.end(),
                  [](const auto& a, const auto& b) { return a.start_time_s < b.start_time_s; });
        const auto lost = rf::resolve_collisions(events);
        for (std::size_t i = 0; i < events.size(); ++i) {
            if (events[i].start_time_s < interval || events[i].start_time_s >= 2 * interval)
                continue;
            ++total_mid;
            if (lost.count(i)) ++lost_mid;
        }
    }
    const double observed = static_cast<double>(lost_mid) / static_cast<double>(total_mid);
    CHECK_THAT(observed, WithinAbs(rf::collision_probability_exact(n, airtime, interval), 0.02));
}

TEST_CASE("channel parameter validation", "[rfsim]") {
    rf::ChannelParams p = rf::ChannelParams::urban();
    CHECK_NOTHROW(p.validate());

    p = rf::ChannelParams::urban();
    p.path_loss_exponent = 1.9;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    p = rf::ChannelParams::urban();
    p.ref_loss_db = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    p = rf::ChannelParams::urban();
    p.sensitivity_dbm = 20.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    p = rf::ChannelParams::urban();
    p.wall_pair_attenuation_min_db = 6.0;
    p.wall_pair_attenuation_max_db = 3.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
