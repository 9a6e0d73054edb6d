#pragma once

// LoRa to MQTT bridge: deserialize, validate, stamp with the gateway clock,
// enrich, publish QoS 1. While the broker link is down readings go to a
// bounded FIFO cache (capacity 50, drop-oldest) flushed by a retry timer.

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wagglenet/model.hpp"
#include "wagglenet/mqtt/client.hpp"
#include "wagglenet/mqtt/packet.hpp"

namespace wagglenet::gateway {

/// Everything before the first '-' of the node id; the whole id when it has
/// no '-'.
inline std::string hive_id_of(const std::string& node_id) {
    const std::size_t dash = node_id.find('-');
    return dash == std::string::npos ? node_id : node_id.substr(0, dash);
}

inline std::string data_topic(const std::string& node_id) {
    return "wagglenet/hive/" + hive_id_of(node_id) + "/data";
}

/// Clock-offset model of NTP sync: utc = virtual time + offset (+ bounded
/// uniform jitter when enabled).
struct NtpClock {
    double offset_s = 0.0;
    double jitter_bound_s = 0.0;

    std::int64_t utc_at(double virtual_now_s, std::mt19937_64* rng = nullptr) const {
        double t = virtual_now_s + offset_s;
        if (jitter_bound_s > 0.0 && rng != nullptr) {
            std::uniform_real_distribution<double> jitter(-jitter_bound_s, jitter_bound_s);
            t += jitter(*rng);
        }
        return static_cast<std::int64_t>(t >= 0 ? t : t - 1.0);  // floor
    }
};

enum class RejectionCause { MalformedJson, OutOfRange, TimestampInsane };

inline const char* to_string(RejectionCause c) {
    switch (c) {
        case RejectionCause::MalformedJson: return "malformed_json";
        case RejectionCause::OutOfRange: return "out_of_range";
        case RejectionCause::TimestampInsane: return "timestamp_insane";
    }
    return "unknown";
}

struct GatewayOptions {
    std::string gateway_id = "gw-1";
    NtpClock ntp;
    double temperature_min_c = -40.0;  // sensor operating window
    double temperature_max_c = 80.0;
    double timestamp_window_s = 86400.0;  // sanity bound on |local - utc|
    std::size_t cache_capacity = 50;
    double retry_interval_s = 30.0;
    double processing_delay_s = 0.05;
    double resend_timeout_s = 10.0;
};

class Gateway {
  public:
    struct RejectionCounters {
        std::uint64_t malformed_json = 0;
        std::uint64_t out_of_range = 0;
        std::uint64_t timestamp_insane = 0;

        std::uint64_t total() const {
            return malformed_json + out_of_range + timestamp_insane;
        }
    };

    struct ReceiveResult {
        std::optional<EnrichedReading> enriched;
        std::optional<RejectionCause> rejection;
        std::string detail;
    };

    struct PublishActions {
        std::vector<mqtt::ControlPacket> send;
        std::size_t cached = 0;
        std::size_t evicted = 0;
    };

    explicit Gateway(GatewayOptions options)
        : options_(std::move(options)),
          session_({options_.gateway_id, 60, options_.resend_timeout_s}) {}

    /// Total validation: any byte sequence yields either an enriched reading
    /// or exactly one rejection cause.
    ReceiveResult on_lora_receive(const std::vector<std::uint8_t>& bytes, double rssi_dbm,
                                  double virtual_now_s, std::mt19937_64* rng = nullptr) {
        ReceiveResult result;
        SensorReading reading;
        try {
            reading = decode_payload(
                std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
        } catch (const OutOfRangeError& e) {
            ++rejections_.out_of_range;
            result.rejection = RejectionCause::OutOfRange;
            result.detail = e.field;
            return result;
        } catch (const MissingFieldError& e) {
            ++rejections_.malformed_json;
            result.rejection = RejectionCause::MalformedJson;
            result.detail = e.field;
            return result;
        } catch (const MalformedJsonError& e) {
            ++rejections_.malformed_json;
            result.rejection = RejectionCause::MalformedJson;
            result.detail = e.what();
            return result;
        }

        if (reading.temperature_c < options_.temperature_min_c ||
            reading.temperature_c > options_.temperature_max_c) {
            ++rejections_.out_of_range;
            result.rejection = RejectionCause::OutOfRange;
            result.detail = "temperature";
            return result;
        }

        const std::int64_t utc = options_.ntp.utc_at(virtual_now_s, rng);
        const double skew =
            static_cast<double>(reading.timestamp_local) - static_cast<double>(utc);
        if (skew < -options_.timestamp_window_s || skew > options_.timestamp_window_s) {
            ++rejections_.timestamp_insane;
            result.rejection = RejectionCause::TimestampInsane;
            result.detail = "timestamp_local";
            return result;
        }

        result.enriched =
            EnrichedReading{reading, utc, options_.gateway_id, rssi_dbm};
        ++accepted_;
        return result;
    }

    /// Publish when the link is up, otherwise cache (drop-oldest past
    /// capacity). Returns the frames to hand to the transport.
    PublishActions publish(const EnrichedReading& enriched, double now_s) {
        PublishActions actions;
        if (link_up_) {
            actions.send.push_back(make_publish(enriched, now_s));
            ++published_;
        } else {
            cache_.push_back(enriched);
            actions.cached = 1;
            if (cache_.size() > options_.cache_capacity) {
                cache_.pop_front();
                ++overflow_evictions_;
                actions.evicted = 1;
            }
        }
        return actions;
    }

    /// Retry-timer tick: flush the whole cache in arrival order if the link
    /// is back. Cached readings keep their original reception timestamp.
    PublishActions on_retry_tick(double now_s) {
        PublishActions actions;
        if (!link_up_) return actions;
        while (!cache_.empty()) {
            actions.send.push_back(make_publish(cache_.front(), now_s));
            cache_.pop_front();
            ++published_;
        }
        return actions;
    }

    /// QoS 1 redelivery for unacked publishes.
    std::vector<mqtt::ControlPacket> on_elapsed(double now_s) {
        return session_.on_elapsed(now_s).send;
    }

    void set_link_up(bool up) { link_up_ = up; }
    bool link_up() const { return link_up_; }

    mqtt::ClientSession& session() { return session_; }
    const GatewayOptions& options() const { return options_; }
    const RejectionCounters& rejections() const { return rejections_; }
    std::uint64_t accepted() const { return accepted_; }
    std::uint64_t published() const { return published_; }
    std::uint64_t overflow_evictions() const { return overflow_evictions_; }
    std::size_t cache_size() const { return cache_.size(); }

  private:
    mqtt::ControlPacket make_publish(const EnrichedReading& enriched, double now_s) {
        return session_.publish(data_topic(enriched.reading.node_id),
                                encode_enriched(enriched), 1, now_s);
    }

    GatewayOptions options_;
    mqtt::ClientSession session_;
    bool link_up_ = true;
    std::deque<EnrichedReading> cache_;
    RejectionCounters rejections_;
    std::uint64_t accepted_ = 0;
    std::uint64_t published_ = 0;
    std::uint64_t overflow_evictions_ = 0;
};

}  // namespace wagglenet::gateway
