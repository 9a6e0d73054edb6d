#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "wagglenet/cloud/alerts.hpp"
#include "wagglenet/cloud/archive.hpp"
#include "wagglenet/cloud/auth.hpp"
#include "wagglenet/cloud/rest.hpp"
#include "wagglenet/cloud/service.hpp"
#include "wagglenet/cloud/storage.hpp"

using namespace wagglenet;
using namespace wagglenet::cloud;
using Catch::Matchers::WithinAbs;

namespace {

EnrichedReading make_row(const std::string& node, std::int64_t ts_utc,
                         double temperature = 33.2, double humidity = 62.0, int light = 0) {
    EnrichedReading e;
    e.reading = SensorReading::make(node, temperature, humidity, light, 37.8716, -122.2728,
                                    52.0, ts_utc);
    e.timestamp_utc = ts_utc;
    e.gateway_id = "gw-1";
    e.rssi_dbm = -80.0;
    return e;
}

/// Independent reimplementation of the debounce contract: an alert confirms
/// on the k-th consecutive non-normal sample when none is open; its tier is
/// the most severe of the confirming window, most recent on ties; a normal
/// sample clears the run and the open flag.
struct ReferenceDebounce {
    struct Sample {
        Tier tier;
        double value;
        double bound;
        std::int64_t ts;
    };
    std::size_t k;
    std::deque<Sample> run;
    bool open = false;

    std::optional<AlertEvent> feed(const std::string& node, Parameter param, Tier tier,
                                   double value, double bound, std::int64_t ts) {
        if (tier == Tier::Normal) {
            run.clear();
            open = false;
            return std::nullopt;
        }
        run.push_back({tier, value, bound, ts});
        if (run.size() > k) run.pop_front();
        if (open || run.size() < k) return std::nullopt;
        std::size_t worst = run.size() - 1;
        for (std::size_t i = run.size(); i-- > 0;)
            if (run[i].tier > run[worst].tier) worst = i;
        AlertEvent e;
        e.node_id = node;
        e.parameter = param;
        e.tier = run[worst].tier;
        e.value = run[worst].value;
        e.threshold_violated = run[worst].bound;
        e.first_sample_ts = run.front().ts;
        e.confirm_sample_ts = run.back().ts;
        open = true;
        return e;
    }
};

/// Feed the same tier sequence to the engine and the reference; the emitted
/// event streams must be identical.
void compare_sequences(const std::vector<Tier>& tiers, int debounce) {
    Thresholds t;
    t.debounce_samples = debounce;
    AlertEngine engine(t);
    ReferenceDebounce reference{static_cast<std::size_t>(debounce), {}, false};

    for (std::size_t i = 0; i < tiers.size(); ++i) {
        const double value = 100.0 + static_cast<double>(i);
        const double bound = tiers[i] == Tier::Critical ? 38.0 : 36.0;
        const Classification cls{tiers[i], tiers[i] == Tier::Normal ? 0.0 : bound};
        const std::int64_t ts = 1000 + static_cast<std::int64_t>(i) * 180;
        const auto got = engine.on_sample("hive1-brood", Parameter::Temperature, cls, value, ts);
        const auto want =
            reference.feed("hive1-brood", Parameter::Temperature, tiers[i], value, bound, ts);
        REQUIRE(got.has_value() == want.has_value());
        if (got) REQUIRE(*got == *want);
    }
}

std::filesystem::path fresh_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("wagglenet-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("store dedups on node and timestamp", "[cloud]") {
    MemoryStore store;
    CHECK(store.insert_reading(make_row("n1", 100)));
    CHECK_FALSE(store.insert_reading(make_row("n1", 100, 99.0)));  // same key, new payload
    CHECK(store.insert_reading(make_row("n1", 101)));
    CHECK(store.insert_reading(make_row("n2", 100)));
    CHECK(store.reading_count() == 3);

    // the first writer wins
    const auto kept = store.latest("n1");
    REQUIRE(kept.has_value());
    CHECK(kept->enriched.timestamp_utc == 101);
    const auto first = store.query_range("n1", 100, 100);
    REQUIRE(first.size() == 1);
    CHECK_THAT(first[0].enriched.reading.temperature_c, WithinAbs(33.2, 1e-9));

    CHECK(store.has_node("n1"));
    CHECK_FALSE(store.has_node("n3"));
    CHECK_FALSE(store.latest("n3").has_value());

    const auto nodes = store.nodes();
    REQUIRE(nodes.size() == 2);
    CHECK(nodes[0].node_id == "n1");
    CHECK(nodes[0].first_seen_utc == 100);
    CHECK(nodes[0].last_seen_utc == 101);
    CHECK(nodes[0].reading_count == 2);
}

TEST_CASE("range queries are inclusive, sorted and partition cleanly", "[cloud]") {
    MemoryStore store;
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::int64_t> ts(0, 5000);
    const std::vector<std::string> nodes{"a", "b", "c"};
    for (int i = 0; i < 400; ++i)
        store.insert_reading(make_row(nodes[static_cast<std::size_t>(i) % 3], ts(rng)));

    const auto row_ids = [](const std::vector<StoredReading>& rows) {
        std::vector<std::uint64_t> ids;
        for (const auto& r : rows) ids.push_back(r.row_id);
        return ids;
    };

    for (const auto& node : nodes) {
        const auto all = store.query_range(node, 0, 5000);
        for (std::size_t i = 1; i < all.size(); ++i)
            REQUIRE(all[i - 1].enriched.timestamp_utc < all[i].enriched.timestamp_utc);

        // inclusive at both ends
        REQUIRE_FALSE(all.empty());
        const auto only_first = store.query_range(node, all.front().enriched.timestamp_utc,
                                                  all.front().enriched.timestamp_utc);
        REQUIRE(only_first.size() == 1);
        CHECK(only_first[0].row_id == all.front().row_id);

        std::uniform_int_distribution<std::int64_t> mid(0, 4999);
        for (int trial = 0; trial < 20; ++trial) {
            const std::int64_t m = mid(rng);
            auto left = row_ids(store.query_range(node, 0, m));
            const auto right = row_ids(store.query_range(node, m + 1, 5000));
            left.insert(left.end(), right.begin(), right.end());
            REQUIRE(left == row_ids(all));  // disjoint halves reassemble exactly
        }
    }

    // strict-cutoff helpers
    MemoryStore small;
    small.insert_reading(make_row("n", 10));
    small.insert_reading(make_row("n", 20));
    small.insert_reading(make_row("n", 30));
    const auto older = small.readings_before(20);
    REQUIRE(older.size() == 1);
    CHECK(older[0].enriched.timestamp_utc == 10);
    CHECK(small.erase_before(20) == 1);
    CHECK(small.reading_count() == 2);
    CHECK(small.query_range("n", 20, 20).size() == 1);
}

TEST_CASE("classification tiers at the interval boundaries", "[cloud]") {
    const Thresholds t;  // normal [32,36], warning [30,32) and (36,38]

    CHECK(classify_temperature(34.0, t).tier == Tier::Normal);
    CHECK(classify_temperature(32.0, t).tier == Tier::Normal);
    CHECK(classify_temperature(36.0, t).tier == Tier::Normal);
    CHECK(classify_temperature(31.9, t) == Classification{Tier::Warning, 32.0});
    CHECK(classify_temperature(30.0, t) == Classification{Tier::Warning, 32.0});
    CHECK(classify_temperature(29.9, t) == Classification{Tier::Critical, 30.0});
    CHECK(classify_temperature(36.1, t) == Classification{Tier::Warning, 36.0});
    CHECK(classify_temperature(38.0, t) == Classification{Tier::Warning, 36.0});
    CHECK(classify_temperature(38.1, t) == Classification{Tier::Critical, 38.0});

    CHECK(classify_humidity(60.0, t).tier == Tier::Normal);
    CHECK(classify_humidity(45.0, t) == Classification{Tier::Warning, 50.0});
    CHECK(classify_humidity(44.9, t) == Classification{Tier::Critical, 45.0});
    CHECK(classify_humidity(75.0, t) == Classification{Tier::Warning, 70.0});
    CHECK(classify_humidity(75.1, t) == Classification{Tier::Critical, 75.0});

    CHECK(classify_light(80.0, t, 23).tier == Tier::Critical);
    CHECK(classify_light(80.0, t, 5).tier == Tier::Critical);
    CHECK(classify_light(50.0, t, 23).tier == Tier::Normal);   // at the bound is fine
    CHECK(classify_light(80.0, t, 12).tier == Tier::Normal);   // daytime
    CHECK(classify_light(80.0, t, 6).tier == Tier::Normal);    // night ends at 6
}

TEST_CASE("alert engine equals the reference on every short sequence", "[cloud]") {
    const Tier tiers[] = {Tier::Normal, Tier::Warning, Tier::Critical};
    for (int debounce : {2, 3}) {
        for (int len = 1; len <= 6; ++len) {
            int combos = 1;
            for (int i = 0; i < len; ++i) combos *= 3;
            for (int code = 0; code < combos; ++code) {
                std::vector<Tier> seq;
                int rest = code;
                for (int i = 0; i < len; ++i) {
                    seq.push_back(tiers[rest % 3]);
                    rest /= 3;
                }
                compare_sequences(seq, debounce);
            }
        }
    }
}

TEST_CASE("alert engine equals the reference on random long sequences", "[cloud]") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> tier(0, 2);
    const Tier tiers[] = {Tier::Normal, Tier::Warning, Tier::Critical};
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Tier> seq(20);
        for (auto& s : seq) s = tiers[tier(rng)];
        compare_sequences(seq, 2);
    }
}

TEST_CASE("debounce absorbs single excursions and alerts once per run", "[cloud]") {
    AlertEngine engine;  // k = 2
    const auto feed = [&](Tier tier, std::int64_t ts) {
        const Classification cls{tier, tier == Tier::Normal ? 0.0 : 36.0};
        return engine.on_sample("n1", Parameter::Temperature, cls, 37.0, ts);
    };

    SECTION("one bad sample surrounded by normals never alerts") {
        CHECK_FALSE(feed(Tier::Warning, 0).has_value());
        CHECK_FALSE(feed(Tier::Normal, 180).has_value());
        CHECK_FALSE(feed(Tier::Critical, 360).has_value());
        CHECK_FALSE(feed(Tier::Normal, 540).has_value());
        CHECK_FALSE(feed(Tier::Warning, 720).has_value());
    }
    SECTION("two consecutive warnings alert exactly once") {
        CHECK_FALSE(feed(Tier::Warning, 0).has_value());
        const auto alert = feed(Tier::Warning, 180);
        REQUIRE(alert.has_value());
        CHECK(alert->tier == Tier::Warning);
        CHECK(alert->first_sample_ts == 0);
        CHECK(alert->confirm_sample_ts == 180);
        // the run continues but the alert stays open
        CHECK_FALSE(feed(Tier::Warning, 360).has_value());
        CHECK_FALSE(feed(Tier::Critical, 540).has_value());
    }
    SECTION("the confirming window takes the most severe tier") {
        feed(Tier::Warning, 0);
        const auto alert = feed(Tier::Critical, 180);
        REQUIRE(alert.has_value());
        CHECK(alert->tier == Tier::Critical);

        AlertEngine other;
        const auto feed2 = [&](Tier tier, std::int64_t ts) {
            return other.on_sample("n1", Parameter::Temperature,
                                   {tier, tier == Tier::Normal ? 0.0 : 36.0}, 37.0, ts);
        };
        feed2(Tier::Critical, 0);
        const auto downgraded = feed2(Tier::Warning, 180);
        REQUIRE(downgraded.has_value());
        CHECK(downgraded->tier == Tier::Critical);  // severity from the earlier sample
        CHECK(downgraded->confirm_sample_ts == 180);
    }
    SECTION("recovery and relapse re-alert") {
        feed(Tier::Warning, 0);
        REQUIRE(feed(Tier::Warning, 180).has_value());
        feed(Tier::Normal, 360);  // closes
        CHECK_FALSE(feed(Tier::Warning, 540).has_value());
        CHECK(feed(Tier::Warning, 720).has_value());
    }
    SECTION("acknowledging re-arms the track") {
        feed(Tier::Warning, 0);
        REQUIRE(feed(Tier::Warning, 180).has_value());
        engine.acknowledge("n1", Parameter::Temperature);
        CHECK_FALSE(feed(Tier::Warning, 360).has_value());  // run restarts after ack
        CHECK(feed(Tier::Warning, 540).has_value());
    }
}

TEST_CASE("light alerts fire only within the night window", "[cloud]") {
    AlertEngine engine;
    const auto reading = [](int light, std::int64_t ts) {
        return SensorReading::make("n1", 33.0, 60.0, light, 0, 0, 0, ts);
    };
    CHECK(engine.on_reading(reading(80, 0), 0, 23).empty());
    const auto alerts = engine.on_reading(reading(80, 180), 180, 23);
    REQUIRE(alerts.size() == 1);
    CHECK(alerts[0].parameter == Parameter::Light);
    CHECK(alerts[0].tier == Tier::Critical);
    CHECK_THAT(alerts[0].value, WithinAbs(80.0, 1e-9));
    CHECK_THAT(alerts[0].threshold_violated, WithinAbs(50.0, 1e-9));

    AlertEngine daytime;
    CHECK(daytime.on_reading(reading(80, 0), 0, 12).empty());
    CHECK(daytime.on_reading(reading(80, 180), 180, 12).empty());
}

TEST_CASE("service ingest is idempotent and alert-safe", "[cloud]") {
    MemoryStore store;
    CloudService service({}, store);

    const auto critical = make_row("n1", 1000, 38.5);
    auto outcome = service.ingest(encode_enriched(critical), 0.0);
    CHECK(outcome.stored);
    CHECK(outcome.alerts.empty());  // first sample of the run

    // QoS 1 redelivery of the same reading must not advance the debounce
    outcome = service.ingest(encode_enriched(critical), 0.5);
    CHECK(outcome.duplicate);
    CHECK_FALSE(outcome.stored);
    CHECK(outcome.alerts.empty());
    CHECK(service.counters().duplicates == 1);
    CHECK(store.reading_count() == 1);

    // the genuinely new confirming sample alerts
    outcome = service.ingest(encode_enriched(make_row("n1", 1180, 38.4)), 1.0);
    CHECK(outcome.stored);
    REQUIRE(outcome.alerts.size() == 1);
    CHECK(outcome.alerts[0].tier == Tier::Critical);
    CHECK(outcome.alerts[0].parameter == Parameter::Temperature);
    CHECK(service.counters().alerts_emitted == 1);
    CHECK(service.alert_log().size() == 1);

    outcome = service.ingest({0x00, 0x01}, 2.0);
    CHECK(outcome.malformed);
    CHECK(service.counters().malformed == 1);
    CHECK(service.counters().ingested == 2);
}

TEST_CASE("sink failures get one retry then count as drops", "[cloud]") {
    MemoryStore store;
    CloudService service({}, store);
    auto sink = std::make_shared<RecordingSink>("ops");
    service.register_sink(sink);

    const auto trigger = [&](std::int64_t base_ts) {
        service.ingest(encode_enriched(make_row("n1", base_ts, 38.5)), 0.0);
        service.ingest(encode_enriched(make_row("n1", base_ts + 180, 38.5)), 1.0);
        service.ingest(encode_enriched(make_row("n1", base_ts + 360, 33.0)), 2.0);  // reset
    };

    trigger(1000);
    REQUIRE(service.dispatches().size() == 1);
    CHECK(service.dispatches()[0].attempts == 1);
    CHECK(service.dispatches()[0].delivered);
    CHECK(sink->delivered().size() == 1);

    sink->fail_next(1);
    trigger(10000);
    REQUIRE(service.dispatches().size() == 2);
    CHECK(service.dispatches()[1].attempts == 2);
    CHECK(service.dispatches()[1].delivered);  // retry succeeded
    CHECK(service.counters().sink_drops == 0);

    sink->fail_next(2);
    trigger(20000);
    REQUIRE(service.dispatches().size() == 3);
    CHECK(service.dispatches()[2].attempts == 2);
    CHECK_FALSE(service.dispatches()[2].delivered);
    CHECK(service.counters().sink_drops == 1);
}

TEST_CASE("bearer tokens expire after the validity window", "[cloud]") {
    TokenAuthority auth("server-secret");
    const std::int64_t t0 = 1722780000;
    const std::string token = auth.issue("operator", t0);

    const auto fresh = auth.verify(token, t0 + 1);
    REQUIRE(fresh.has_value());
    CHECK(fresh->subject == "operator");
    CHECK(fresh->issued_at == t0);
    CHECK(fresh->expires_at == t0 + 24 * 3600);

    CHECK(auth.verify(token, t0 + 24 * 3600 - 1).has_value());
    CHECK_FALSE(auth.verify(token, t0 + 24 * 3600).has_value());  // expiry is exclusive
    CHECK_FALSE(auth.verify(token, t0 + 25 * 3600).has_value());
}

TEST_CASE("any single-character tamper invalidates a token", "[cloud]") {
    TokenAuthority auth("server-secret");
    const std::int64_t t0 = 1722780000;
    const std::string token = auth.issue("operator", t0);
    REQUIRE(auth.verify(token, t0 + 10).has_value());

    for (std::size_t i = 0; i < token.size(); ++i) {
        std::string mutated = token;
        mutated[i] = mutated[i] == 'a' ? 'b' : 'a';
        REQUIRE(mutated != token);
        REQUIRE_FALSE(auth.verify(mutated, t0 + 10).has_value());
    }

    TokenAuthority other("different-secret");
    CHECK_FALSE(other.verify(token, t0 + 10).has_value());

    CHECK_FALSE(auth.verify("", t0).has_value());
    CHECK_FALSE(auth.verify("a.b", t0).has_value());
    CHECK_FALSE(auth.verify(token + ".extra", t0 + 10).has_value());
}

TEST_CASE("archive day files round trip through gzip", "[cloud]") {
    const auto root = fresh_dir("archive");
    Archive archive(root);

    std::vector<EnrichedReading> rows{make_row("n1", 1722780000), make_row("n1", 1722780180),
                                      make_row("n1", 1722780360, 34.0, 55.0, 10)};
    const std::string date = utc_date_string(1722780000);
    archive.write_day("n1", date, rows);
    REQUIRE(archive.day_exists("n1", date));

    // gzip magic on disk
    std::ifstream raw(archive.day_path("n1", date), std::ios::binary);
    unsigned char magic[2] = {0, 0};
    raw.read(reinterpret_cast<char*>(magic), 2);
    CHECK(magic[0] == 0x1f);
    CHECK(magic[1] == 0x8b);

    CHECK(archive.read_day("n1", date) == rows);
    CHECK_FALSE(archive.day_exists("n1", "1999-01-01"));
    CHECK_THROWS_AS(archive.read_day("n1", "1999-01-01"), ArchiveError);

    std::filesystem::remove_all(root);
}

TEST_CASE("retention sweep archives everything it erases", "[cloud]") {
    const auto root = fresh_dir("retention");
    Archive archive(root);
    MemoryStore store;

    const std::int64_t now = 1722780000;
    const std::int64_t cutoff = now - 90LL * 86400;

    const auto old_a1 = make_row("n1", cutoff - 86400);      // day before the cutoff day
    const auto old_a2 = make_row("n1", cutoff - 86000);      // same day as old_a1
    const auto old_b = make_row("n1", cutoff - 1);           // just inside the sweep
    const auto boundary = make_row("n1", cutoff);            // exactly at the cutoff: stays
    const auto fresh = make_row("n1", now - 10);
    const auto other_old = make_row("n2", cutoff - 5000);
    for (const auto& r : {old_a1, old_a2, old_b, boundary, fresh, other_old})
        REQUIRE(store.insert_reading(r));

    // a pre-existing day file must be merged, not clobbered
    const std::string old_day = utc_date_string(old_a1.timestamp_utc);
    const auto preexisting = make_row("n1", cutoff - 86400 - 60);
    archive.write_day("n1", old_day, {preexisting});

    const std::size_t archived = retention_sweep(store, archive, now, 90);
    CHECK(archived == 4);
    CHECK(store.reading_count() == 2);  // boundary row and the fresh one
    CHECK(store.query_range("n1", cutoff, cutoff).size() == 1);

    const auto merged = archive.read_day("n1", old_day);
    REQUIRE(merged.size() == 3);
    CHECK(merged == std::vector<EnrichedReading>{preexisting, old_a1, old_a2});

    const auto late_day = archive.read_day("n1", utc_date_string(old_b.timestamp_utc));
    REQUIRE(late_day.size() == 1);
    CHECK(late_day[0] == old_b);

    const auto n2_day = archive.read_day("n2", utc_date_string(other_old.timestamp_utc));
    REQUIRE(n2_day.size() == 1);
    CHECK(n2_day[0] == other_old);

    // nothing older remains, so a second sweep is a no-op
    CHECK(retention_sweep(store, archive, now, 90) == 0);

    std::filesystem::remove_all(root);
}

TEST_CASE("rest api authorizes, serves data and registers sinks", "[cloud]") {
    MemoryStore store;
    CloudService service({}, store);
    for (int i = 0; i < 10; ++i)
        store.insert_reading(make_row("n1", 1000 + i * 180, 33.0 + i * 0.1));

    const std::int64_t now = 1722780000;
    TokenAuthority auth("secret");
    RestServer server(store, service, auth, [now] { return now; });
    const std::uint16_t port = server.start(0);
    REQUIRE(port != 0);

    httplib::Client client("127.0.0.1", port);
    const httplib::Headers good{{"Authorization", "Bearer " + auth.issue("tester", now)}};
    const httplib::Headers stale{
        {"Authorization", "Bearer " + auth.issue("tester", now - 25 * 3600)}};

    SECTION("authorization gates every endpoint") {
        for (const char* path : {"/api/nodes", "/api/data/n1?start=0&end=1", "/api/latest/n1"}) {
            const auto bare = client.Get(path);
            REQUIRE(bare);
            CHECK(bare->status == 401);
            const auto expired = client.Get(path, stale);
            REQUIRE(expired);
            CHECK(expired->status == 401);
        }
        // 401 wins even for unknown nodes
        const auto unknown = client.Get("/api/latest/ghost");
        REQUIRE(unknown);
        CHECK(unknown->status == 401);
    }
    SECTION("node inventory") {
        const auto res = client.Get("/api/nodes", good);
        REQUIRE(res);
        REQUIRE(res->status == 200);
        const auto body = nlohmann::json::parse(res->body);
        REQUIRE(body["nodes"].size() == 1);
        CHECK(body["nodes"][0]["node_id"] == "n1");
        CHECK(body["nodes"][0]["reading_count"] == 10);
        CHECK(body["nodes"][0]["first_seen_utc"] == 1000);
        CHECK(body["nodes"][0]["last_seen_utc"] == 1000 + 9 * 180);
    }
    SECTION("range queries and their failure modes") {
        const auto res = client.Get("/api/data/n1?start=1180&end=1720", good);
        REQUIRE(res);
        REQUIRE(res->status == 200);
        const auto body = nlohmann::json::parse(res->body);
        REQUIRE(body["rows"].size() == 4);  // 1180, 1360, 1540, 1720
        CHECK(body["rows"][0]["timestamp_utc"] == 1180);
        CHECK(body["rows"][3]["timestamp_utc"] == 1720);
        CHECK(body["rows"][0]["gateway_id"] == "gw-1");

        CHECK(client.Get("/api/data/n1", good)->status == 400);                      // no range
        CHECK(client.Get("/api/data/n1?start=5&end=1", good)->status == 400);        // inverted
        CHECK(client.Get("/api/data/n1?start=abc&end=9", good)->status == 400);      // not a number
        CHECK(client.Get("/api/data/ghost?start=0&end=9", good)->status == 404);
    }
    SECTION("latest reading") {
        const auto res = client.Get("/api/latest/n1", good);
        REQUIRE(res);
        REQUIRE(res->status == 200);
        const auto body = nlohmann::json::parse(res->body);
        CHECK(body["timestamp_utc"] == 1000 + 9 * 180);
        CHECK(body["node_id"] == "n1");
        CHECK(client.Get("/api/latest/ghost", good)->status == 404);
    }
    SECTION("sink registration and webhook delivery") {
        // plain named sink
        auto res = client.Post("/api/alerts/subscribe", good, R"({"name":"ops"})",
                               "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(service.sinks().size() == 1);

        res = client.Post("/api/alerts/subscribe", good, "{}", "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);

        // webhook sink posting back to a local listener
        httplib::Server hook;
        std::mutex mutex;
        std::vector<std::string> bodies;
        hook.Post("/alert", [&](const httplib::Request& req, httplib::Response& r) {
            std::lock_guard<std::mutex> lock(mutex);
            bodies.push_back(req.body);
            r.set_content("ok", "text/plain");
        });
        const int hook_port = hook.bind_to_any_port("127.0.0.1");
        REQUIRE(hook_port > 0);
        std::thread hook_thread([&] { hook.listen_after_bind(); });
        hook.wait_until_ready();

        const std::string registration = std::string(R"({"name":"pager","webhook":)") +
                                         R"({"host":"127.0.0.1","port":)" +
                                         std::to_string(hook_port) + R"(,"path":"/alert"}})";
        res = client.Post("/api/alerts/subscribe", good, registration, "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);

        // two critical samples confirm an alert, which fans out synchronously
        service.ingest(encode_enriched(make_row("n1", 5000, 38.5)), 0.0);
        service.ingest(encode_enriched(make_row("n1", 5180, 38.6)), 1.0);
        {
            std::lock_guard<std::mutex> lock(mutex);
            REQUIRE(bodies.size() == 1);
            const auto alert = nlohmann::json::parse(bodies[0]);
            CHECK(alert["node_id"] == "n1");
            CHECK(alert["parameter"] == "temperature");
            CHECK(alert["tier"] == "critical");
        }
        hook.stop();
        hook_thread.join();
    }

    server.stop();
}
