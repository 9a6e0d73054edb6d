#pragma once

// Run outputs: per-reading records, per-node aggregates, and the overall
// metrics report with its JSON/CSV serializations. Identical runs serialize
// byte-identically; that property is part of the engine's contract.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "wagglenet/cloud/alerts.hpp"
#include "wagglenet/sim/latency.hpp"

namespace wagglenet::sim {

enum class ReadingStatus { InFlight, Delivered, LostRange, LostCollision, Rejected };

inline const char* to_string(ReadingStatus s) {
    switch (s) {
        case ReadingStatus::InFlight: return "in_flight";
        case ReadingStatus::Delivered: return "delivered";
        case ReadingStatus::LostRange: return "lost_range";
        case ReadingStatus::LostCollision: return "lost_collision";
        case ReadingStatus::Rejected: return "rejected";
    }
    return "unknown";
}

/// One sampled reading and the fate of its transmission.
struct ReadingRecord {
    std::string node_id;
    int cycle = 0;
    double sample_time_s = 0.0;
    double temperature_c = 0.0;
    double humidity_pct = 0.0;
    int light_pct = 0;
    int attempts = 0;
    ReadingStatus status = ReadingStatus::InFlight;
    double rssi_dbm = 0.0;  // final attempt as observed at the gateway
    double energy_mah = 0.0;
    double cached_at_s = -1.0;  // entered the gateway outage cache
    double delivered_at_s = 0.0;
    LatencySample latency;  // valid when status == Delivered
};

struct NodeReport {
    std::string node_id;
    int packets_sent = 0;
    int delivered = 0;
    int lost_range = 0;
    int lost_collision = 0;
    int rejected = 0;
    int in_flight = 0;
    int attempts_total = 0;
    double pdr = 0.0;
    double rssi_mean_dbm = 0.0;
    double rssi_min_dbm = 0.0;
    double rssi_max_dbm = 0.0;
    int max_light_pct = 0;
    double energy_mah = 0.0;
    double avg_current_ma = 0.0;
    double projected_life_hours = 0.0;
};

struct AlertRecord {
    std::string node_id;
    std::string parameter;
    std::string tier;
    double value = 0.0;
    double threshold_violated = 0.0;
    std::int64_t first_sample_ts = 0;
    std::int64_t confirm_sample_ts = 0;
    double dispatch_latency_s = 0.0;  // confirming sample time to sink dispatch
    std::string sink;
    bool delivered = false;
};

struct MetricsReport {
    std::string scenario;
    std::uint64_t seed = 0;
    double duration_s = 0.0;

    int packets_sent = 0;
    int delivered = 0;
    int lost_range = 0;
    int lost_collision = 0;
    int rejected = 0;
    int in_flight = 0;
    double pdr = 0.0;
    bool conservation_ok = false;
    int latency_identity_violations = 0;

    LatencyStats latency;
    std::vector<NodeReport> nodes;
    std::vector<AlertRecord> alerts;

    struct GatewayReport {
        std::uint64_t accepted = 0;
        std::uint64_t rejected_malformed_json = 0;
        std::uint64_t rejected_out_of_range = 0;
        std::uint64_t rejected_timestamp_insane = 0;
        std::uint64_t published = 0;
        std::uint64_t cache_evictions = 0;
        std::size_t cache_size_at_end = 0;
    } gateway;

    struct BrokerReport {
        std::uint64_t publishes_received = 0;
        std::uint64_t publishes_forwarded = 0;
        std::uint64_t resends = 0;
    } broker;

    struct CloudReport {
        std::uint64_t ingested = 0;
        std::uint64_t duplicates = 0;
        std::uint64_t malformed = 0;
        std::uint64_t alerts_emitted = 0;
    } cloud;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["scenario"] = scenario;
        j["seed"] = seed;
        j["duration_s"] = duration_s;
        j["totals"] = {{"packets_sent", packets_sent},
                       {"delivered", delivered},
                       {"lost_range", lost_range},
                       {"lost_collision", lost_collision},
                       {"rejected", rejected},
                       {"in_flight", in_flight},
                       {"pdr", pdr},
                       {"conservation_ok", conservation_ok},
                       {"latency_identity_violations", latency_identity_violations}};
        j["latency"] = {{"count", latency.count},
                        {"mean_s", latency.mean_s},
                        {"stddev_s", latency.stddev_s},
                        {"min_s", latency.min_s},
                        {"max_s", latency.max_s}};
        j["nodes"] = nlohmann::ordered_json::array();
        for (const auto& n : nodes) {
            j["nodes"].push_back({{"node_id", n.node_id},
                                  {"packets_sent", n.packets_sent},
                                  {"delivered", n.delivered},
                                  {"lost_range", n.lost_range},
                                  {"lost_collision", n.lost_collision},
                                  {"rejected", n.rejected},
                                  {"in_flight", n.in_flight},
                                  {"attempts_total", n.attempts_total},
                                  {"pdr", n.pdr},
                                  {"rssi_mean_dbm", n.rssi_mean_dbm},
                                  {"rssi_min_dbm", n.rssi_min_dbm},
                                  {"rssi_max_dbm", n.rssi_max_dbm},
                                  {"max_light_pct", n.max_light_pct},
                                  {"energy_mah", n.energy_mah},
                                  {"avg_current_ma", n.avg_current_ma},
                                  {"projected_life_hours", n.projected_life_hours}});
        }
        j["alerts"] = nlohmann::ordered_json::array();
        for (const auto& a : alerts) {
            j["alerts"].push_back({{"node_id", a.node_id},
                                   {"parameter", a.parameter},
                                   {"tier", a.tier},
                                   {"value", a.value},
                                   {"threshold_violated", a.threshold_violated},
                                   {"first_sample_ts", a.first_sample_ts},
                                   {"confirm_sample_ts", a.confirm_sample_ts},
                                   {"dispatch_latency_s", a.dispatch_latency_s},
                                   {"sink", a.sink},
                                   {"delivered", a.delivered}});
        }
        j["gateway"] = {{"accepted", gateway.accepted},
                        {"rejected_malformed_json", gateway.rejected_malformed_json},
                        {"rejected_out_of_range", gateway.rejected_out_of_range},
                        {"rejected_timestamp_insane", gateway.rejected_timestamp_insane},
                        {"published", gateway.published},
                        {"cache_evictions", gateway.cache_evictions},
                        {"cache_size_at_end", gateway.cache_size_at_end}};
        j["broker"] = {{"publishes_received", broker.publishes_received},
                       {"publishes_forwarded", broker.publishes_forwarded},
                       {"resends", broker.resends}};
        j["cloud"] = {{"ingested", cloud.ingested},
                      {"duplicates", cloud.duplicates},
                      {"malformed", cloud.malformed},
                      {"alerts_emitted", cloud.alerts_emitted}};
        return j;
    }

    std::string to_json_string() const { return to_json().dump(2) + "\n"; }
};

/// Per-reading time series, schema-stable for external plotting.
inline std::string readings_csv(const std::vector<ReadingRecord>& records) {
    std::string out =
        "node_id,cycle,sample_time_s,status,attempts,rssi_dbm,"
        "temperature_c,humidity_pct,light_pct,latency_total_s,energy_mah\n";
    char line[320];
    for (const auto& r : records) {
        const double latency_total =
            r.status == ReadingStatus::Delivered ? r.latency.total_s() : -1.0;
        std::snprintf(line, sizeof(line), "%s,%d,%.3f,%s,%d,%.2f,%.1f,%.1f,%d,%.6f,%.6f\n",
                      r.node_id.c_str(), r.cycle, r.sample_time_s, to_string(r.status),
                      r.attempts, r.rssi_dbm, r.temperature_c, r.humidity_pct, r.light_pct,
                      latency_total, r.energy_mah);
        out += line;
    }
    return out;
}

}  // namespace wagglenet::sim
