#pragma once

// Application tier: subscribes to the data topic, ingests with idempotent
// dedup, upserts node metadata, classifies samples, debounces alerts, and
// fans notifications out to pluggable sinks (failed sinks get one retry).

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "wagglenet/cloud/alerts.hpp"
#include "wagglenet/cloud/storage.hpp"
#include "wagglenet/model.hpp"
#include "wagglenet/mqtt/client.hpp"
#include "wagglenet/mqtt/packet.hpp"

namespace wagglenet::cloud {

class NotificationSink {
  public:
    virtual ~NotificationSink() = default;
    virtual const std::string& name() const = 0;
    virtual bool deliver(const AlertEvent& event) = 0;
};

/// In-memory sink for tests; can be told to fail the next N deliveries.
class RecordingSink final : public NotificationSink {
  public:
    explicit RecordingSink(std::string name = "recorder") : name_(std::move(name)) {}

    const std::string& name() const override { return name_; }

    bool deliver(const AlertEvent& event) override {
        if (fail_remaining_ > 0) {
            --fail_remaining_;
            return false;
        }
        delivered_.push_back(event);
        return true;
    }

    void fail_next(int n) { fail_remaining_ = n; }
    const std::vector<AlertEvent>& delivered() const { return delivered_; }

  private:
    std::string name_;
    int fail_remaining_ = 0;
    std::vector<AlertEvent> delivered_;
};

struct DispatchRecord {
    AlertEvent event;
    std::string sink_name;
    bool delivered = false;
    int attempts = 0;
    double dispatched_at_s = 0.0;
};

struct CloudOptions {
    std::string client_id = "cloud-1";
    std::string data_filter = "wagglenet/hive/+/data";
    Thresholds thresholds;
    double utc_offset_hours = 0.0;
    double resend_timeout_s = 10.0;
    double ingest_delay_s = 0.1;  // arrival-to-persist budget, used by the scheduler
};

class CloudService {
  public:
    struct Counters {
        std::uint64_t ingested = 0;
        std::uint64_t duplicates = 0;
        std::uint64_t malformed = 0;
        std::uint64_t alerts_emitted = 0;
        std::uint64_t sink_drops = 0;
    };

    struct IngestOutcome {
        bool stored = false;
        bool duplicate = false;
        bool malformed = false;
        EnrichedReading enriched;  // valid when stored or duplicate
        std::vector<AlertEvent> alerts;
    };

    CloudService(CloudOptions options, Store& store)
        : options_(std::move(options)),
          store_(store),
          engine_(options_.thresholds),
          session_({options_.client_id, 60, options_.resend_timeout_s}) {}

    mqtt::ClientSession& session() { return session_; }

    mqtt::ControlPacket connect_packet() const { return session_.connect_packet(); }

    mqtt::ControlPacket subscribe_packet() {
        return session_.subscribe_packet({{options_.data_filter, 1}});
    }

    /// One enriched payload off the wire. Duplicates are ignored before the
    /// alert engine sees them, so QoS 1 redelivery cannot double-count a
    /// debounce run.
    IngestOutcome ingest(const std::vector<std::uint8_t>& payload, double now_s) {
        IngestOutcome outcome;
        EnrichedReading enriched;
        try {
            enriched = decode_enriched(std::string_view(
                reinterpret_cast<const char*>(payload.data()), payload.size()));
        } catch (const std::exception&) {
            ++counters_.malformed;
            outcome.malformed = true;
            return outcome;
        }

        outcome.enriched = enriched;
        if (!store_.insert_reading(enriched)) {
            ++counters_.duplicates;
            outcome.duplicate = true;
            return outcome;
        }
        ++counters_.ingested;
        outcome.stored = true;

        const int local_hour = static_cast<int>(local_clock_hour(
            static_cast<double>(enriched.timestamp_utc), options_.utc_offset_hours));
        outcome.alerts =
            engine_.on_reading(enriched.reading, enriched.timestamp_utc, local_hour);
        for (const auto& alert : outcome.alerts) {
            alert_log_.push_back(alert);
            ++counters_.alerts_emitted;
            notify(alert, now_s);
        }
        return outcome;
    }

    void register_sink(std::shared_ptr<NotificationSink> sink) {
        sinks_.push_back(std::move(sink));
    }

    const std::vector<std::shared_ptr<NotificationSink>>& sinks() const { return sinks_; }
    const std::vector<DispatchRecord>& dispatches() const { return dispatches_; }
    const std::vector<AlertEvent>& alert_log() const { return alert_log_; }
    const Counters& counters() const { return counters_; }
    AlertEngine& alerts() { return engine_; }
    const CloudOptions& options() const { return options_; }

  private:
    void notify(const AlertEvent& alert, double now_s) {
        for (const auto& sink : sinks_) {
            DispatchRecord record;
            record.event = alert;
            record.sink_name = sink->name();
            record.dispatched_at_s = now_s;
            record.attempts = 1;
            record.delivered = sink->deliver(alert);
            if (!record.delivered) {
                record.attempts = 2;
                record.delivered = sink->deliver(alert);
                if (!record.delivered) ++counters_.sink_drops;
            }
            dispatches_.push_back(std::move(record));
        }
    }

    CloudOptions options_;
    Store& store_;
    AlertEngine engine_;
    mqtt::ClientSession session_;
    std::vector<std::shared_ptr<NotificationSink>> sinks_;
    std::vector<DispatchRecord> dispatches_;
    std::vector<AlertEvent> alert_log_;
    Counters counters_;
};

}  // namespace wagglenet::cloud
