#pragma once

// Worker-node behavioral model: the sample/transmit/sleep cycle, synthetic
// sensor generation for internal and external placements, and the
// duty-cycle energy model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "wagglenet/model.hpp"

namespace wagglenet {

// ---------------------------------------------------------------------------
// Sensor generators

/// Synthetic sensor parameters. Internal nodes model the thermoregulated
/// brood nest (tight normal around the colony setpoint, total darkness);
/// external nodes follow a diurnal sinusoid with its peak mid-afternoon
/// and a daylight band for the light channel.
struct SensorModelParams {
    double internal_mean_temp_c = 33.2;
    double internal_temp_sigma = 0.5;
    double internal_temp_min_c = 30.0;
    double internal_temp_max_c = 37.0;
    double internal_humidity_mean = 62.0;
    double internal_humidity_sigma = 2.0;
    double external_diurnal_mean_c = 22.0;
    double external_diurnal_amplitude_c = 4.0;
    double external_temp_sigma = 0.3;
    double external_humidity_mean = 58.0;
    double external_humidity_sigma = 2.0;
    int internal_light_pct = 0;
    int external_day_light_min_pct = 75;
    int external_day_light_max_pct = 85;
    double sunrise_hour = 6.0;
    double sunset_hour = 18.0;

    /// Diurnal baseline: trough at 03:00 local, peak at 15:00.
    double diurnal_temp_c(double local_hour) const {
        return external_diurnal_mean_c +
               external_diurnal_amplitude_c *
                   std::sin(2.0 * std::numbers::pi * (local_hour - 9.0) / 24.0);
    }

    /// Daylight fraction: 0 at night, 1 in full day, linear ramps over the
    /// hour after sunrise and the hour before sunset.
    double daylight_fraction(double local_hour) const {
        if (local_hour < sunrise_hour || local_hour >= sunset_hour) return 0.0;
        const double since_sunrise = local_hour - sunrise_hour;
        const double until_sunset = sunset_hour - local_hour;
        return std::clamp(std::min(since_sunrise, until_sunset), 0.0, 1.0);
    }
};

// ---------------------------------------------------------------------------
// Energy model

/// Per-mode current draws and durations. Defaults match the measured duty
/// cycle: 100 mA for the 7 s active window, 18 mA light sleep for the rest
/// of a 180 s interval, 1100 mAh pack.
struct EnergyProfile {
    double active_current_ma = 100.0;
    double active_duration_s = 7.0;
    double sleep_current_ma = 18.0;
    double deep_sleep_current_ma = 3.0;
    double battery_capacity_mah = 1100.0;
    double retry_energy_mah = 0.0107;  // extra TX attempt: ~120 mA over one airtime

    void validate(double sample_interval_s) const {
        if (active_current_ma <= 0 || active_duration_s <= 0 || sleep_current_ma <= 0 ||
            deep_sleep_current_ma <= 0 || battery_capacity_mah <= 0)
            throw std::invalid_argument("energy profile values must be positive");
        if (active_duration_s >= sample_interval_s)
            throw std::invalid_argument("active_duration_s must be below the sample interval");
    }
};

/// Time-weighted mean of active and sleep currents over one interval.
inline double average_current_ma(const EnergyProfile& p, double interval_s) {
    if (interval_s < p.active_duration_s)
        throw std::invalid_argument("interval shorter than active window");
    return (p.active_current_ma * p.active_duration_s +
            p.sleep_current_ma * (interval_s - p.active_duration_s)) /
           interval_s;
}

inline double battery_life_hours(const EnergyProfile& p, double interval_s) {
    return p.battery_capacity_mah / average_current_ma(p, interval_s);
}

/// Charge drawn by one cycle, plus any extra transmit attempts beyond the first.
inline double cycle_energy_mah(const EnergyProfile& p, double interval_s, int extra_attempts = 0) {
    return (p.active_current_ma * p.active_duration_s +
            p.sleep_current_ma * (interval_s - p.active_duration_s)) /
               3600.0 +
           extra_attempts * p.retry_energy_mah;
}

/// Cycle-by-cycle battery depletion, interpolating through the piecewise
/// current profile of the final partial cycle. Must agree with the closed
/// form battery_life_hours within 2%.
inline double simulate_depletion_hours(const EnergyProfile& p, double interval_s) {
    double remaining = p.battery_capacity_mah;
    double elapsed_s = 0.0;
    const double per_cycle = cycle_energy_mah(p, interval_s);
    while (remaining >= per_cycle) {
        remaining -= per_cycle;
        elapsed_s += interval_s;
    }
    const double active_mah = p.active_current_ma * p.active_duration_s / 3600.0;
    if (remaining <= active_mah) {
        elapsed_s += remaining / p.active_current_ma * 3600.0;
    } else {
        elapsed_s += p.active_duration_s +
                     (remaining - active_mah) / p.sleep_current_ma * 3600.0;
    }
    return elapsed_s / 3600.0;
}

// ---------------------------------------------------------------------------
// NodeConfig

struct GeoPosition {
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;
    double altitude_m = 0.0;
};

struct NodeConfig {
    std::string node_id;
    NodeRole role;
    GeoPosition position;
    double gps_jitter_m = 2.5;
    double sample_interval_s = 180.0;
    int max_tx_retries = 3;      // total attempts per cycle
    double retry_backoff_s = 2.0;
    double clock_skew_s = 0.0;
    double start_offset_s = 0.0;  // phase of the first cycle within the interval grid
    double distance_to_gateway_m = 0.0;
    SensorModelParams sensor_model;
    EnergyProfile energy;

    void validate() const {
        if (node_id.empty() || node_id.size() > 32)
            throw std::invalid_argument("node_id must be 1..32 characters");
        if (max_tx_retries < 1) throw std::invalid_argument("max_tx_retries must be >= 1");
        if (role.placement == Placement::Internal && role.obstructions < 1)
            throw std::invalid_argument("internal placement requires obstructions >= 1");
        energy.validate(sample_interval_s);
    }
};

// ---------------------------------------------------------------------------
// Sampling

namespace detail {

inline double truncated_normal(std::mt19937_64& rng, double mean, double sigma, double lo,
                               double hi) {
    if (sigma <= 0.0) return std::clamp(mean, lo, hi);
    std::normal_distribution<double> dist(mean, sigma);
    for (int i = 0; i < 1000; ++i) {
        const double v = dist(rng);
        if (v >= lo && v <= hi) return v;
    }
    return std::clamp(mean, lo, hi);
}

constexpr double kMetersPerDegreeLat = 111320.0;

}  // namespace detail

/// Generate one reading for the node at an absolute epoch instant.
/// Reproducible: the same seed yields the same reading sequence.
inline SensorReading sample_sensors(const NodeConfig& config, double epoch_utc_s,
                                    double utc_offset_hours, std::mt19937_64& rng) {
    const auto& sm = config.sensor_model;
    const double hour = local_clock_hour(epoch_utc_s, utc_offset_hours);

    double temperature = 0.0;
    double humidity = 0.0;
    int light = 0;
    if (config.role.placement == Placement::Internal) {
        temperature = detail::truncated_normal(rng, sm.internal_mean_temp_c,
                                               sm.internal_temp_sigma, sm.internal_temp_min_c,
                                               sm.internal_temp_max_c);
        humidity = detail::truncated_normal(rng, sm.internal_humidity_mean,
                                            sm.internal_humidity_sigma, 0.0, 100.0);
        light = sm.internal_light_pct;
    } else {
        temperature = detail::truncated_normal(rng, sm.diurnal_temp_c(hour),
                                               sm.external_temp_sigma,
                                               SensorReading::kTemperatureMin,
                                               SensorReading::kTemperatureMax);
        humidity = detail::truncated_normal(rng, sm.external_humidity_mean,
                                            sm.external_humidity_sigma, 0.0, 100.0);
        const double frac = sm.daylight_fraction(hour);
        if (frac > 0.0) {
            std::uniform_real_distribution<double> band(sm.external_day_light_min_pct,
                                                        sm.external_day_light_max_pct);
            light = static_cast<int>(std::lround(frac * band(rng)));
        }
    }

    double lat = config.position.latitude_deg;
    double lon = config.position.longitude_deg;
    if (config.gps_jitter_m > 0.0) {
        std::normal_distribution<double> noise_m(0.0, config.gps_jitter_m);
        lat += noise_m(rng) / detail::kMetersPerDegreeLat;
        const double meters_per_deg_lon =
            detail::kMetersPerDegreeLat *
            std::max(std::cos(config.position.latitude_deg * std::numbers::pi / 180.0), 1e-6);
        lon += noise_m(rng) / meters_per_deg_lon;
    }

    return SensorReading::make(
        config.node_id, temperature, humidity, std::clamp(light, 0, 100),
        std::clamp(lat, -90.0, 90.0), std::clamp(lon, -180.0, 180.0),
        config.position.altitude_m,
        static_cast<std::int64_t>(std::floor(epoch_utc_s)) +
            static_cast<std::int64_t>(config.clock_skew_s));
}

// ---------------------------------------------------------------------------
// Cycle

enum class CycleOutcome { Delivered, LostAfterRetries };

struct CycleResult {
    CycleOutcome outcome = CycleOutcome::LostAfterRetries;
    int attempts = 0;
    double energy_mah = 0.0;
    SensorReading reading;
    std::vector<double> attempt_times_s;  // epoch of each transmit attempt
};

/// Per-attempt channel verdict: true when the gateway received the frame.
using TxAttemptFn = std::function<bool(const SensorReading&, int attempt, double epoch_s)>;

/// One sample/transmit/sleep cycle: sample, transmit with up to
/// max_tx_retries attempts separated by the fixed backoff, then account
/// sleep energy for the remainder of the interval. Failure is a modeled
/// outcome, not an error.
inline CycleResult run_node_cycle(const NodeConfig& config, const TxAttemptFn& try_transmit,
                                  double cycle_start_epoch_s, double utc_offset_hours,
                                  std::mt19937_64& rng) {
    CycleResult result;
    result.reading = sample_sensors(config, cycle_start_epoch_s, utc_offset_hours, rng);
    double attempt_epoch = cycle_start_epoch_s;
    for (int attempt = 1; attempt <= config.max_tx_retries; ++attempt) {
        result.attempts = attempt;
        result.attempt_times_s.push_back(attempt_epoch);
        if (try_transmit(result.reading, attempt, attempt_epoch)) {
            result.outcome = CycleOutcome::Delivered;
            break;
        }
        attempt_epoch += config.retry_backoff_s;
    }
    result.energy_mah =
        cycle_energy_mah(config.energy, config.sample_interval_s, result.attempts - 1);
    return result;
}

}  // namespace wagglenet
