#pragma once

// End-to-end latency decomposition. Each delivered reading carries one
// sampled instance of every budget component; the reading's latency is their
// sum, checked as an accounting identity by the simulation.

#include <cmath>
#include <cstddef>
#include <random>

namespace wagglenet::sim {

/// Uniform jitter around a mean, clamped at zero.
struct JitterComponent {
    double mean_s = 0.0;
    double jitter_s = 0.0;

    double sample(std::mt19937_64& rng) const {
        if (jitter_s <= 0.0) return mean_s;
        std::uniform_real_distribution<double> dist(mean_s - jitter_s, mean_s + jitter_s);
        const double v = dist(rng);
        return v < 0.0 ? 0.0 : v;
    }
};

/// Defaults put the mean total near 3.8 s for the 200-byte payload airtime:
/// 0.318 + 0.05 + 0.3 + 0.05 + 0.1 + 2.99. The residual stands in for the
/// unmodeled app-display path; it is calibrated once, not refit per run.
struct LatencyBudget {
    double gateway_processing_s = 0.05;
    JitterComponent wifi_mqtt{0.3, 0.2};
    double broker_processing_s = 0.05;
    double cloud_ingest_s = 0.1;
    JitterComponent residual{2.99, 2.0};
};

struct LatencySample {
    double retry_delay_s = 0.0;    // LoRa retransmission backoff
    double lora_airtime_s = 0.0;   // successful attempt
    double gateway_processing_s = 0.0;
    double queue_wait_s = 0.0;     // time parked in the gateway outage cache
    double wifi_mqtt_s = 0.0;
    double broker_processing_s = 0.0;
    double cloud_ingest_s = 0.0;
    double residual_s = 0.0;

    double total_s() const {
        return retry_delay_s + lora_airtime_s + gateway_processing_s + queue_wait_s +
               wifi_mqtt_s + broker_processing_s + cloud_ingest_s + residual_s;
    }
};

struct LatencyStats {
    std::size_t count = 0;
    double mean_s = 0.0;
    double stddev_s = 0.0;
    double min_s = 0.0;
    double max_s = 0.0;
};

template <typename It>
LatencyStats latency_stats(It first, It last) {
    LatencyStats stats;
    double sum = 0.0;
    for (It it = first; it != last; ++it) {
        const double v = *it;
        if (stats.count == 0) {
            stats.min_s = stats.max_s = v;
        } else {
            if (v < stats.min_s) stats.min_s = v;
            if (v > stats.max_s) stats.max_s = v;
        }
        sum += v;
        ++stats.count;
    }
    if (stats.count == 0) return stats;
    stats.mean_s = sum / static_cast<double>(stats.count);
    double sq = 0.0;
    for (It it = first; it != last; ++it) {
        const double d = *it - stats.mean_s;
        sq += d * d;
    }
    stats.stddev_s = stats.count > 1
                         ? std::sqrt(sq / static_cast<double>(stats.count - 1))
                         : 0.0;
    return stats;
}

}  // namespace wagglenet::sim
