#pragma once

// Core domain types and the wire-stable JSON payload codec shared by the
// node simulator, gateway, and cloud tier.
//
// The serialized payload is canonical: fixed field order, fixed numeric
// precision (temperature/humidity/altitude 1 decimal, coordinates 6
// decimals), two-space indentation, LF separators, no trailing newline.
// Determinism is what makes the size envelope testable.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace wagglenet {

// ---------------------------------------------------------------------------
// Errors

struct MalformedJsonError : std::runtime_error {
    explicit MalformedJsonError(const std::string& what)
        : std::runtime_error("malformed json: " + what) {}
};

struct MissingFieldError : std::runtime_error {
    explicit MissingFieldError(std::string field_name)
        : std::runtime_error("missing field: " + field_name),
          field(std::move(field_name)) {}
    std::string field;
};

struct OutOfRangeError : std::runtime_error {
    OutOfRangeError(std::string field_name, double got)
        : std::runtime_error("out of range: " + field_name + " = " + std::to_string(got)),
          field(std::move(field_name)), value(got) {}
    std::string field;
    double value;
};

// ---------------------------------------------------------------------------
// SensorReading

/// One worker-node sample. Immutable value; invariants are enforced at
/// construction so the codec never has to re-check them.
///
/// Field bounds: node_id 1..32 chars, humidity/light 0..100,
/// latitude/longitude within the geographic domain. Temperature, altitude
/// and timestamp carry wide sanity bounds so every valid reading renders
/// to a bounded byte length.
struct SensorReading {
    std::string node_id;
    double temperature_c = 0.0;
    double humidity_pct = 0.0;
    int light_pct = 0;
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;
    double altitude_m = 0.0;
    std::int64_t timestamp_local = 0;

    static constexpr double kTemperatureMin = -100.0;
    static constexpr double kTemperatureMax = 999.9;
    static constexpr double kAltitudeMin = -1000.0;
    static constexpr double kAltitudeMax = 99999.9;
    static constexpr std::int64_t kTimestampMax = 9'999'999'999'999;

    static SensorReading make(std::string node_id, double temperature_c,
                              double humidity_pct, int light_pct,
                              double latitude_deg, double longitude_deg,
                              double altitude_m, std::int64_t timestamp_local) {
        if (node_id.empty() || node_id.size() > 32)
            throw OutOfRangeError("node_id", static_cast<double>(node_id.size()));
        auto check = [](const char* name, double v, double lo, double hi) {
            if (!(v >= lo && v <= hi)) throw OutOfRangeError(name, v);
        };
        check("temperature", temperature_c, kTemperatureMin, kTemperatureMax);
        check("humidity", humidity_pct, 0.0, 100.0);
        check("light", light_pct, 0, 100);
        check("latitude", latitude_deg, -90.0, 90.0);
        check("longitude", longitude_deg, -180.0, 180.0);
        check("altitude", altitude_m, kAltitudeMin, kAltitudeMax);
        if (timestamp_local < 0 || timestamp_local > kTimestampMax)
            throw OutOfRangeError("timestamp_local", static_cast<double>(timestamp_local));
        return SensorReading{std::move(node_id), temperature_c, humidity_pct,
                             light_pct,          latitude_deg,  longitude_deg,
                             altitude_m,         timestamp_local};
    }

    bool operator==(const SensorReading&) const = default;
};

// ---------------------------------------------------------------------------
// EnrichedReading

/// A SensorReading after gateway validation. timestamp_utc comes from the
/// gateway clock and is the authoritative ordering key; worker clocks are
/// unsynchronized, so no relation to timestamp_local is implied.
struct EnrichedReading {
    SensorReading reading;
    std::int64_t timestamp_utc = 0;
    std::string gateway_id;
    double rssi_dbm = 0.0;

    bool operator==(const EnrichedReading&) const = default;
};

// ---------------------------------------------------------------------------
// NodeRole

enum class Placement { Internal, External };

/// Internal placement implies at least one attenuating wall-pair between
/// node and gateway.
struct NodeRole {
    Placement placement = Placement::External;
    int obstructions = 0;  // count of attenuating wall-pairs

    static NodeRole internal(int wall_pairs) {
        if (wall_pairs < 1) throw OutOfRangeError("obstructions", wall_pairs);
        return NodeRole{Placement::Internal, wall_pairs};
    }
    static NodeRole external() { return NodeRole{Placement::External, 0}; }
};

// ---------------------------------------------------------------------------
// Thresholds

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Three-tier alert thresholds. The warning intervals adjoin the normal
/// interval without overlapping: normal is closed, warnings are half-open
/// against it, critical is everything beyond.
struct Thresholds {
    Interval temp_normal{32.0, 36.0};
    Interval temp_warning_low{30.0, 32.0};   // [lo, normal.lo)
    Interval temp_warning_high{36.0, 38.0};  // (normal.hi, hi]
    Interval humidity_normal{50.0, 70.0};
    Interval humidity_warning_low{45.0, 50.0};
    Interval humidity_warning_high{70.0, 75.0};
    double night_light_max_pct = 50.0;
    int night_start_hour = 18;  // night window wraps midnight: [start, 24) U [0, end)
    int night_end_hour = 6;
    double day_light_min_pct = 10.0;  // daytime-normal floor; informational, no alert tier
    int debounce_samples = 2;

    bool is_night(int local_hour) const {
        if (night_start_hour <= night_end_hour)
            return local_hour >= night_start_hour && local_hour < night_end_hour;
        return local_hour >= night_start_hour || local_hour < night_end_hour;
    }
};

/// Local wall-clock hour (fractional, [0, 24)) for an epoch instant under a
/// fixed UTC offset. Drives the diurnal generators and the night window.
inline double local_clock_hour(double epoch_s, double utc_offset_hours) {
    double h = std::fmod(epoch_s / 3600.0 + utc_offset_hours, 24.0);
    if (h < 0) h += 24.0;
    return h;
}

// ---------------------------------------------------------------------------
// Payload codec

namespace detail {

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s(buf);
    if (s == "-0.0" || s == "-0.000000") s.erase(0, 1);  // keep zero sign-free
    return s;
}

}  // namespace detail

/// Serialize a reading into the canonical UTF-8 JSON wire form.
/// Representative readings land in the 180-220 byte band; any valid
/// reading stays within [150, 240].
inline std::vector<std::uint8_t> encode_payload(const SensorReading& r) {
    std::string out;
    out.reserve(224);
    out += "{\n";
    out += "  \"node_id\": \"" + r.node_id + "\",\n";
    out += "  \"temperature\": " + detail::fixed(r.temperature_c, 1) + ",\n";
    out += "  \"humidity\": " + detail::fixed(r.humidity_pct, 1) + ",\n";
    out += "  \"light\": " + std::to_string(r.light_pct) + ",\n";
    out += "  \"latitude\": " + detail::fixed(r.latitude_deg, 6) + ",\n";
    out += "  \"longitude\": " + detail::fixed(r.longitude_deg, 6) + ",\n";
    out += "  \"altitude\": " + detail::fixed(r.altitude_m, 1) + ",\n";
    out += "  \"timestamp_local\": " + std::to_string(r.timestamp_local) + "\n";
    out += "}";
    return {out.begin(), out.end()};
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw MissingFieldError(key);
    return *it;
}

inline double number_field(const nlohmann::json& j, const char* key) {
    const auto& v = require(j, key);
    if (!v.is_number()) throw MalformedJsonError(std::string(key) + " is not a number");
    return v.get<double>();
}

inline std::int64_t integer_field(const nlohmann::json& j, const char* key) {
    const auto& v = require(j, key);
    if (!v.is_number_integer()) throw MalformedJsonError(std::string(key) + " is not an integer");
    return v.get<std::int64_t>();
}

inline std::string string_field(const nlohmann::json& j, const char* key) {
    const auto& v = require(j, key);
    if (!v.is_string()) throw MalformedJsonError(std::string(key) + " is not a string");
    return v.get<std::string>();
}

}  // namespace detail

/// Parse a payload back into a SensorReading. Unknown extra fields are
/// tolerated for forward compatibility; missing fields, non-JSON input and
/// invariant violations raise distinct errors so the gateway can count
/// rejection causes.
inline SensorReading decode_payload(std::string_view bytes) {
    nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw MalformedJsonError("not a JSON object");
    const double light = detail::number_field(j, "light");
    if (light < 0 || light > 100) throw OutOfRangeError("light", light);
    return SensorReading::make(
        detail::string_field(j, "node_id"), detail::number_field(j, "temperature"),
        detail::number_field(j, "humidity"), static_cast<int>(light),
        detail::number_field(j, "latitude"), detail::number_field(j, "longitude"),
        detail::number_field(j, "altitude"), detail::integer_field(j, "timestamp_local"));
}

inline SensorReading decode_payload(const std::vector<std::uint8_t>& bytes) {
    return decode_payload(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

/// Enriched wire form published on `wagglenet/hive/<hive_id>/data`:
/// the payload fields plus gateway timestamp, id and observed RSSI.
inline std::vector<std::uint8_t> encode_enriched(const EnrichedReading& e) {
    auto payload = encode_payload(e.reading);
    std::string out(payload.begin(), payload.end());
    out.erase(out.size() - 2);  // drop "\n}" to splice the gateway fields in
    out += ",\n";
    out += "  \"timestamp_utc\": " + std::to_string(e.timestamp_utc) + ",\n";
    out += "  \"gateway_id\": \"" + e.gateway_id + "\",\n";
    out += "  \"rssi_dbm\": " + detail::fixed(e.rssi_dbm, 1) + "\n";
    out += "}";
    return {out.begin(), out.end()};
}

inline EnrichedReading decode_enriched(std::string_view bytes) {
    nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw MalformedJsonError("not a JSON object");
    EnrichedReading e;
    e.reading = decode_payload(bytes);
    e.timestamp_utc = detail::integer_field(j, "timestamp_utc");
    e.gateway_id = detail::string_field(j, "gateway_id");
    e.rssi_dbm = detail::number_field(j, "rssi_dbm");
    return e;
}

inline EnrichedReading decode_enriched(const std::vector<std::uint8_t>& bytes) {
    return decode_enriched(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace wagglenet
