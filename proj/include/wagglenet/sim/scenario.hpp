#pragma once

// Scenario files: JSON with // comments describing one simulation run.
// Parsing is strict in both directions: required keys must be present and
// typed correctly, and keys this loader does not know are errors, so a
// typo cannot silently fall back to a default.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wagglenet/sim/simulation.hpp"

namespace wagglenet::sim {

constexpr int kScenarioSchemaVersion = 1;

/// A parsed scenario file: the run configuration plus where its reports go.
/// Output names are file names; the CLI resolves them against --out-dir.
struct Scenario {
    SimulationConfig sim;
    std::string report_json;
    std::string readings_csv;
};

namespace detail {

using json = nlohmann::json;

struct Section {
    const json& node;
    std::string path;
    mutable std::set<std::string> seen;

    Section(const json& n, std::string p) : node(n), path(std::move(p)) {
        if (!node.is_object()) throw ConfigError(path + ": expected an object");
    }

    /// Call after all known keys were claimed; leftovers are author errors.
    void done() const {
        for (const auto& [key, value] : node.items()) {
            if (!seen.count(key))
                throw ConfigError(path + ": unknown key \"" + key + "\"");
        }
    }

    bool has(const std::string& key) const {
        seen.insert(key);
        return node.contains(key);
    }

    const json& at(const std::string& key) const {
        if (!has(key)) throw ConfigError(path + ": missing required key \"" + key + "\"");
        return node.at(key);
    }

    template <typename T>
    T require(const std::string& key) const {
        return convert<T>(at(key), key);
    }

    template <typename T>
    void opt(const std::string& key, T& out) const {
        if (has(key)) out = convert<T>(node.at(key), key);
    }

    template <typename T>
    T convert(const json& v, const std::string& key) const {
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path + "." + key + ": wrong type");
        }
    }

    void interval(const std::string& key, double& lo, double& hi) const {
        if (!has(key)) return;
        const json& v = node.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ConfigError(path + "." + key + ": expected [lo, hi]");
        lo = v[0].get<double>();
        hi = v[1].get<double>();
        if (lo > hi) throw ConfigError(path + "." + key + ": interval inverted");
    }
};

inline rf::ChannelParams parse_channel(const json& j, const std::string& path) {
    Section s(j, path);
    rf::ChannelParams p;
    if (s.has("preset")) {
        const auto preset = s.convert<std::string>(j.at("preset"), "preset");
        if (preset == "urban") p = rf::ChannelParams::urban();
        else if (preset == "rural") p = rf::ChannelParams::rural();
        else throw ConfigError(path + ".preset: expected \"urban\" or \"rural\"");
    }
    s.opt("tx_power_dbm", p.tx_power_dbm);
    s.opt("tx_antenna_gain_dbi", p.tx_antenna_gain_dbi);
    s.opt("rx_antenna_gain_dbi", p.rx_antenna_gain_dbi);
    s.opt("frequency_hz", p.frequency_hz);
    s.opt("ref_loss_db", p.ref_loss_db);
    s.opt("path_loss_exponent", p.path_loss_exponent);
    if (s.has("anchor")) {
        Section a(j.at("anchor"), path + ".anchor");
        p.path_loss_exponent = rf::ChannelParams::calibrate_exponent(
            p.ref_loss_db, a.require<double>("distance_m"), a.require<double>("loss_db"));
        a.done();
    }
    s.opt("shadowing_sigma_db", p.shadowing_sigma_db);
    s.opt("sensitivity_dbm", p.sensitivity_dbm);
    s.opt("wall_pair_attenuation_min_db", p.wall_pair_attenuation_min_db);
    s.opt("wall_pair_attenuation_max_db", p.wall_pair_attenuation_max_db);
    s.opt("stochastic_walls", p.stochastic_walls);
    s.done();
    return p;
}

inline rf::LoraAirParams parse_air(const json& j, const std::string& path) {
    Section s(j, path);
    rf::LoraAirParams p;
    s.opt("spreading_factor", p.spreading_factor);
    s.opt("bandwidth_hz", p.bandwidth_hz);
    s.opt("coding_rate_denominator", p.coding_rate_denominator);
    s.opt("preamble_symbols", p.preamble_symbols);
    s.opt("explicit_header", p.explicit_header);
    s.opt("crc_on", p.crc_on);
    s.opt("low_data_rate_optimize", p.low_data_rate_optimize);
    if (s.has("fixed_airtime_s"))
        p.fixed_airtime_override_s = s.convert<double>(j.at("fixed_airtime_s"), "fixed_airtime_s");
    s.done();
    return p;
}

inline gateway::GatewayOptions parse_gateway(const json& j, const std::string& path) {
    Section s(j, path);
    gateway::GatewayOptions p;
    s.opt("gateway_id", p.gateway_id);
    s.opt("ntp_offset_s", p.ntp.offset_s);
    s.opt("ntp_jitter_bound_s", p.ntp.jitter_bound_s);
    s.opt("temperature_min_c", p.temperature_min_c);
    s.opt("temperature_max_c", p.temperature_max_c);
    s.opt("timestamp_window_s", p.timestamp_window_s);
    if (s.has("cache_capacity")) {
        const auto cap = s.convert<std::int64_t>(j.at("cache_capacity"), "cache_capacity");
        if (cap < 0) throw ConfigError(path + ".cache_capacity: negative");
        p.cache_capacity = static_cast<std::size_t>(cap);
    }
    s.opt("retry_interval_s", p.retry_interval_s);
    s.opt("processing_delay_s", p.processing_delay_s);
    s.opt("resend_timeout_s", p.resend_timeout_s);
    s.done();
    return p;
}

inline Thresholds parse_thresholds(const json& j, const std::string& path) {
    Section s(j, path);
    Thresholds t;
    s.interval("temp_normal", t.temp_normal.lo, t.temp_normal.hi);
    double warn_lo = t.temp_warning_low.lo;
    double warn_hi = t.temp_warning_high.hi;
    s.interval("temp_warning", warn_lo, warn_hi);
    t.temp_warning_low = {warn_lo, t.temp_normal.lo};
    t.temp_warning_high = {t.temp_normal.hi, warn_hi};
    s.interval("humidity_normal", t.humidity_normal.lo, t.humidity_normal.hi);
    double hwarn_lo = t.humidity_warning_low.lo;
    double hwarn_hi = t.humidity_warning_high.hi;
    s.interval("humidity_warning", hwarn_lo, hwarn_hi);
    t.humidity_warning_low = {hwarn_lo, t.humidity_normal.lo};
    t.humidity_warning_high = {t.humidity_normal.hi, hwarn_hi};
    s.opt("night_light_max_pct", t.night_light_max_pct);
    s.opt("night_start_hour", t.night_start_hour);
    s.opt("night_end_hour", t.night_end_hour);
    s.opt("day_light_min_pct", t.day_light_min_pct);
    s.opt("debounce_samples", t.debounce_samples);
    s.done();
    return t;
}

inline cloud::CloudOptions parse_cloud(const json& j, const std::string& path) {
    Section s(j, path);
    cloud::CloudOptions p;
    s.opt("client_id", p.client_id);
    s.opt("data_filter", p.data_filter);
    s.opt("resend_timeout_s", p.resend_timeout_s);
    s.opt("ingest_delay_s", p.ingest_delay_s);
    if (s.has("thresholds"))
        p.thresholds = parse_thresholds(j.at("thresholds"), path + ".thresholds");
    s.done();
    return p;
}

inline LatencyBudget parse_latency(const json& j, const std::string& path) {
    Section s(j, path);
    LatencyBudget b;
    s.opt("gateway_processing_s", b.gateway_processing_s);
    s.opt("wifi_mean_s", b.wifi_mqtt.mean_s);
    s.opt("wifi_jitter_s", b.wifi_mqtt.jitter_s);
    s.opt("broker_processing_s", b.broker_processing_s);
    s.opt("cloud_ingest_s", b.cloud_ingest_s);
    s.opt("residual_mean_s", b.residual.mean_s);
    s.opt("residual_jitter_s", b.residual.jitter_s);
    s.done();
    return b;
}

inline SensorModelParams parse_sensors(const json& j, const std::string& path) {
    Section s(j, path);
    SensorModelParams p;
    s.opt("internal_mean_temp_c", p.internal_mean_temp_c);
    s.opt("internal_temp_sigma", p.internal_temp_sigma);
    s.opt("internal_temp_min_c", p.internal_temp_min_c);
    s.opt("internal_temp_max_c", p.internal_temp_max_c);
    s.opt("internal_humidity_mean", p.internal_humidity_mean);
    s.opt("internal_humidity_sigma", p.internal_humidity_sigma);
    s.opt("external_diurnal_mean_c", p.external_diurnal_mean_c);
    s.opt("external_diurnal_amplitude_c", p.external_diurnal_amplitude_c);
    s.opt("external_temp_sigma", p.external_temp_sigma);
    s.opt("external_humidity_mean", p.external_humidity_mean);
    s.opt("external_humidity_sigma", p.external_humidity_sigma);
    s.opt("internal_light_pct", p.internal_light_pct);
    s.opt("external_day_light_min_pct", p.external_day_light_min_pct);
    s.opt("external_day_light_max_pct", p.external_day_light_max_pct);
    s.opt("sunrise_hour", p.sunrise_hour);
    s.opt("sunset_hour", p.sunset_hour);
    s.done();
    return p;
}

inline EnergyProfile parse_energy(const json& j, const std::string& path) {
    Section s(j, path);
    EnergyProfile p;
    s.opt("active_current_ma", p.active_current_ma);
    s.opt("active_duration_s", p.active_duration_s);
    s.opt("sleep_current_ma", p.sleep_current_ma);
    s.opt("deep_sleep_current_ma", p.deep_sleep_current_ma);
    s.opt("battery_capacity_mah", p.battery_capacity_mah);
    s.opt("retry_energy_mah", p.retry_energy_mah);
    s.done();
    return p;
}

inline NodeConfig parse_node(const json& j, const std::string& path) {
    Section s(j, path);
    NodeConfig n;
    n.node_id = s.require<std::string>("node_id");
    const auto placement = s.require<std::string>("placement");
    if (placement == "internal") {
        int walls = 1;
        s.opt("wall_pairs", walls);
        n.role = NodeRole::internal(walls);
    } else if (placement == "external") {
        n.role = NodeRole::external();
        if (s.has("wall_pairs"))
            throw ConfigError(path + ".wall_pairs: only internal nodes sit behind walls");
    } else {
        throw ConfigError(path + ".placement: expected \"internal\" or \"external\"");
    }
    n.distance_to_gateway_m = s.require<double>("distance_m");
    s.opt("sample_interval_s", n.sample_interval_s);
    s.opt("start_offset_s", n.start_offset_s);
    s.opt("max_tx_retries", n.max_tx_retries);
    s.opt("retry_backoff_s", n.retry_backoff_s);
    s.opt("clock_skew_s", n.clock_skew_s);
    s.opt("gps_jitter_m", n.gps_jitter_m);
    if (s.has("position")) {
        Section pos(j.at("position"), path + ".position");
        pos.opt("latitude_deg", n.position.latitude_deg);
        pos.opt("longitude_deg", n.position.longitude_deg);
        pos.opt("altitude_m", n.position.altitude_m);
        pos.done();
    }
    if (s.has("sensors")) n.sensor_model = parse_sensors(j.at("sensors"), path + ".sensors");
    if (s.has("energy")) n.energy = parse_energy(j.at("energy"), path + ".energy");
    s.done();
    return n;
}

}  // namespace detail

inline Scenario load_scenario(const std::string& text) {
    using detail::json;
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }

    detail::Section s(j, "scenario");
    const int version = s.require<int>("schema_version");
    if (version != kScenarioSchemaVersion)
        throw ConfigError("scenario: unsupported schema_version " + std::to_string(version));

    Scenario scenario;
    SimulationConfig& cfg = scenario.sim;
    cfg.name = s.require<std::string>("name");
    cfg.duration_s = s.require<double>("duration_s");
    s.opt("seed", cfg.seed);
    s.opt("start_epoch_s", cfg.sim_start_epoch_s);
    s.opt("utc_offset_hours", cfg.utc_offset_hours);
    if (s.has("channel")) cfg.channel = detail::parse_channel(j.at("channel"), "channel");
    if (s.has("air")) cfg.air = detail::parse_air(j.at("air"), "air");
    if (s.has("gateway")) cfg.gateway = detail::parse_gateway(j.at("gateway"), "gateway");
    if (s.has("cloud")) cfg.cloud = detail::parse_cloud(j.at("cloud"), "cloud");
    if (s.has("latency")) cfg.latency = detail::parse_latency(j.at("latency"), "latency");
    cfg.cloud.utc_offset_hours = cfg.utc_offset_hours;

    const auto& nodes = s.at("nodes");
    if (!nodes.is_array()) throw ConfigError("scenario.nodes: expected an array");
    for (std::size_t i = 0; i < nodes.size(); ++i)
        cfg.nodes.push_back(
            detail::parse_node(nodes[i], "nodes[" + std::to_string(i) + "]"));

    if (s.has("outage")) {
        detail::Section o(j.at("outage"), "outage");
        cfg.outage.start_s = o.require<double>("start_s");
        cfg.outage.duration_s = o.require<double>("duration_s");
        o.done();
    }
    if (s.has("excursions")) {
        const auto& arr = j.at("excursions");
        if (!arr.is_array()) throw ConfigError("scenario.excursions: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            detail::Section e(arr[i], "excursions[" + std::to_string(i) + "]");
            ExcursionInjection inj;
            inj.node_id = e.require<std::string>("node_id");
            inj.start_s = e.require<double>("start_s");
            inj.duration_s = e.require<double>("duration_s");
            e.opt("temperature_c", inj.temperature_c);
            e.done();
            cfg.excursions.push_back(inj);
        }
    }
    s.opt("drop_first_acks", cfg.drop_first_acks);
    s.opt("drain_grace_s", cfg.drain_grace_s);

    scenario.report_json = cfg.name + "_report.json";
    scenario.readings_csv = cfg.name + "_readings.csv";
    if (s.has("outputs")) {
        detail::Section o(j.at("outputs"), "outputs");
        o.opt("report_json", scenario.report_json);
        o.opt("readings_csv", scenario.readings_csv);
        o.done();
    }
    s.done();

    cfg.validate();
    return scenario;
}

inline Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str());
}

}  // namespace wagglenet::sim
