#pragma once

// Three-tier threshold classification and the debounced alert engine. An
// alert fires when debounce_samples consecutive samples for one
// (node, parameter) are all non-Normal; its tier is the most severe of the
// confirming run. A Normal sample resets the run and closes any open alert;
// at most one alert stays open per (node, parameter) until then or until
// acknowledged.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wagglenet/model.hpp"

namespace wagglenet::cloud {

enum class Parameter { Temperature, Humidity, Light };
enum class Tier { Normal, Warning, Critical };

inline const char* to_string(Parameter p) {
    switch (p) {
        case Parameter::Temperature: return "temperature";
        case Parameter::Humidity: return "humidity";
        case Parameter::Light: return "light";
    }
    return "unknown";
}

inline const char* to_string(Tier t) {
    switch (t) {
        case Tier::Normal: return "normal";
        case Tier::Warning: return "warning";
        case Tier::Critical: return "critical";
    }
    return "unknown";
}

/// A classified sample: the tier plus the interval bound it violated
/// (meaningful only when tier != Normal).
struct Classification {
    Tier tier = Tier::Normal;
    double violated_bound = 0.0;

    bool operator==(const Classification&) const = default;
};

inline Classification classify_temperature(double v, const Thresholds& t) {
    if (t.temp_normal.contains(v)) return {Tier::Normal, 0.0};
    if (v >= t.temp_warning_low.lo && v < t.temp_normal.lo)
        return {Tier::Warning, t.temp_normal.lo};
    if (v > t.temp_normal.hi && v <= t.temp_warning_high.hi)
        return {Tier::Warning, t.temp_normal.hi};
    return {Tier::Critical, v < t.temp_normal.lo ? t.temp_warning_low.lo
                                                 : t.temp_warning_high.hi};
}

inline Classification classify_humidity(double v, const Thresholds& t) {
    if (t.humidity_normal.contains(v)) return {Tier::Normal, 0.0};
    if (v >= t.humidity_warning_low.lo && v < t.humidity_normal.lo)
        return {Tier::Warning, t.humidity_normal.lo};
    if (v > t.humidity_normal.hi && v <= t.humidity_warning_high.hi)
        return {Tier::Warning, t.humidity_normal.hi};
    return {Tier::Critical, v < t.humidity_normal.lo ? t.humidity_warning_low.lo
                                                     : t.humidity_warning_high.hi};
}

/// The light rule applies only inside the night window.
inline Classification classify_light(double pct, const Thresholds& t, int local_hour) {
    if (t.is_night(local_hour) && pct > t.night_light_max_pct)
        return {Tier::Critical, t.night_light_max_pct};
    return {Tier::Normal, 0.0};
}

struct ClassifiedReading {
    Classification temperature;
    Classification humidity;
    Classification light;
};

inline ClassifiedReading classify(const SensorReading& r,
                                  const Thresholds& t, int local_hour) {
    return {classify_temperature(r.temperature_c, t),
            classify_humidity(r.humidity_pct, t),
            classify_light(static_cast<double>(r.light_pct), t, local_hour)};
}

struct AlertEvent {
    std::string node_id;
    Parameter parameter = Parameter::Temperature;
    Tier tier = Tier::Warning;
    double value = 0.0;
    double threshold_violated = 0.0;
    std::int64_t first_sample_ts = 0;
    std::int64_t confirm_sample_ts = 0;
    bool acknowledged = false;

    bool operator==(const AlertEvent&) const = default;
};

class AlertEngine {
  public:
    explicit AlertEngine(Thresholds thresholds = {})
        : thresholds_(std::move(thresholds)) {}

    const Thresholds& thresholds() const { return thresholds_; }

    /// Feed one classified sample; returns the alert it confirms, if any.
    /// Samples must arrive in timestamp order per node.
    std::optional<AlertEvent> on_sample(const std::string& node_id, Parameter parameter,
                                        const Classification& sample, double value,
                                        std::int64_t timestamp) {
        Track& track = tracks_[{node_id, parameter}];
        if (sample.tier == Tier::Normal) {
            track.run.clear();
            track.open = false;
            return std::nullopt;
        }
        track.run.push_back({sample.tier, value, sample.violated_bound, timestamp});
        const std::size_t k = static_cast<std::size_t>(thresholds_.debounce_samples);
        if (track.run.size() > k) track.run.erase(track.run.begin());
        if (track.open || track.run.size() < k) return std::nullopt;

        // Most severe sample in the confirming run; the most recent one wins
        // a tie so the event reflects the current excursion.
        const Sample* worst = &track.run.back();
        for (auto it = track.run.rbegin(); it != track.run.rend(); ++it)
            if (it->tier > worst->tier) worst = &*it;

        AlertEvent event;
        event.node_id = node_id;
        event.parameter = parameter;
        event.tier = worst->tier;
        event.value = worst->value;
        event.threshold_violated = worst->bound;
        event.first_sample_ts = track.run.front().timestamp;
        event.confirm_sample_ts = track.run.back().timestamp;
        track.open = true;
        return event;
    }

    /// All three parameters of one reading, classified and debounced.
    std::vector<AlertEvent> on_reading(const SensorReading& r,
                                       std::int64_t timestamp_utc, int local_hour) {
        const ClassifiedReading c = classify(r, thresholds_, local_hour);
        std::vector<AlertEvent> events;
        const auto step = [&](Parameter p, const Classification& cls, double value) {
            if (auto e = on_sample(r.node_id, p, cls, value, timestamp_utc))
                events.push_back(std::move(*e));
        };
        step(Parameter::Temperature, c.temperature, r.temperature_c);
        step(Parameter::Humidity, c.humidity, r.humidity_pct);
        step(Parameter::Light, c.light, static_cast<double>(r.light_pct));
        return events;
    }

    /// Clears the open flag so a fresh violation run can alert again.
    void acknowledge(const std::string& node_id, Parameter parameter) {
        const auto it = tracks_.find({node_id, parameter});
        if (it != tracks_.end()) {
            it->second.open = false;
            it->second.run.clear();
        }
    }

  private:
    struct Sample {
        Tier tier;
        double value;
        double bound;
        std::int64_t timestamp;
    };
    struct Track {
        std::vector<Sample> run;
        bool open = false;
    };

    Thresholds thresholds_;
    std::map<std::pair<std::string, Parameter>, Track> tracks_;
};

}  // namespace wagglenet::cloud
