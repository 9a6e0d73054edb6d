#pragma once

// The integrated run: simulated nodes transmit over the channel model to
// the gateway, which publishes through the broker core to the cloud tier,
// all advanced by one event queue and one seeded RNG. Every quantity in the
// metrics report is reproducible from (config, seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wagglenet/cloud/service.hpp"
#include "wagglenet/cloud/storage.hpp"
#include "wagglenet/gateway.hpp"
#include "wagglenet/model.hpp"
#include "wagglenet/mqtt/broker.hpp"
#include "wagglenet/nodesim.hpp"
#include "wagglenet/rfsim.hpp"
#include "wagglenet/sim/latency.hpp"
#include "wagglenet/sim/report.hpp"
#include "wagglenet/sim/scheduler.hpp"

namespace wagglenet::sim {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Temperature override window for one node, in virtual time.
struct ExcursionInjection {
    std::string node_id;
    double start_s = 0.0;
    double duration_s = 0.0;
    double temperature_c = 38.2;
};

/// Broker-unreachable window for the gateway uplink.
struct OutageInjection {
    double start_s = -1.0;
    double duration_s = 0.0;

    bool enabled() const { return start_s >= 0.0 && duration_s > 0.0; }
};

struct SimulationConfig {
    std::string name = "sim";
    double duration_s = 0.0;
    std::uint64_t seed = 1;
    double sim_start_epoch_s = 1722780000.0;  // virtual t=0 as a UTC epoch
    double utc_offset_hours = 0.0;
    std::vector<NodeConfig> nodes;
    rf::ChannelParams channel;
    rf::LoraAirParams air;
    gateway::GatewayOptions gateway;
    cloud::CloudOptions cloud;
    LatencyBudget latency;
    OutageInjection outage;
    std::vector<ExcursionInjection> excursions;
    int drop_first_acks = 0;       // broker-to-gateway PUBACK loss injection
    double drain_grace_s = 120.0;  // extra time for in-flight chains to finish

    void validate() const {
        if (nodes.empty()) throw ConfigError("scenario has zero nodes");
        if (duration_s < 0.0) throw ConfigError("negative duration");
        try {
            channel.validate();
            for (const auto& n : nodes) n.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        for (const auto& e : excursions) {
            bool known = false;
            for (const auto& n : nodes) known = known || n.node_id == e.node_id;
            if (!known) throw ConfigError("excursion targets unknown node " + e.node_id);
        }
    }
};

struct RunResult {
    MetricsReport report;
    std::vector<ReadingRecord> readings;
};

class Simulation {
  public:
    explicit Simulation(SimulationConfig config)
        : config_(std::move(config)),
          rng_(config_.seed),
          broker_({config_.gateway.resend_timeout_s}),
          gateway_(with_epoch(config_.gateway, config_.sim_start_epoch_s)),
          service_(config_.cloud, store_) {
        config_.validate();
        service_.register_sink(std::make_shared<cloud::RecordingSink>("recorder"));
    }

    RunResult run() {
        connect_backhaul();
        schedule_node_cycles();
        schedule_retry_ticks();
        schedule_injections();
        // New cycles stop at the horizon; the grace window lets chains that
        // are already airborne reach the store before we tally.
        queue_.run_until(config_.duration_s + config_.drain_grace_s);
        return assemble();
    }

    cloud::MemoryStore& store() { return store_; }
    cloud::CloudService& service() { return service_; }
    gateway::Gateway& gw() { return gateway_; }
    mqtt::BrokerCore& broker() { return broker_; }
    const SimulationConfig& config() const { return config_; }

  private:
    static constexpr std::uint64_t kGatewayConn = 1;
    static constexpr std::uint64_t kCloudConn = 2;

    /// The gateway clock reads virtual time; anchor it to the scenario's
    /// epoch so readings' wall-clock timestamps pass the sanity window.
    static gateway::GatewayOptions with_epoch(gateway::GatewayOptions o, double epoch_s) {
        o.ntp.offset_s += epoch_s;
        return o;
    }

    struct ActiveTx {
        std::size_t node_idx = 0;
        std::size_t reading_idx = 0;
        int attempt = 0;
        double start_s = 0.0;
        double end_s = 0.0;
        double rssi_dbm = 0.0;
        bool collided = false;
    };

    // -- setup ---------------------------------------------------------------

    void connect_backhaul() {
        broker_.on_connection_opened(kGatewayConn);
        for (const auto& f :
             broker_.on_packet(kGatewayConn, gateway_.session().connect_packet(), 0.0).send)
            gateway_.session().on_packet(f.packet, 0.0);
        broker_.on_connection_opened(kCloudConn);
        for (const auto& f :
             broker_.on_packet(kCloudConn, service_.connect_packet(), 0.0).send)
            service_.session().on_packet(f.packet, 0.0);
        for (const auto& f :
             broker_.on_packet(kCloudConn, service_.subscribe_packet(), 0.0).send)
            service_.session().on_packet(f.packet, 0.0);
    }

    void schedule_node_cycles() {
        for (std::size_t i = 0; i < config_.nodes.size(); ++i) {
            const double first = config_.nodes[i].start_offset_s;
            if (first < config_.duration_s)
                queue_.schedule(first, [this, i](double now) { node_cycle(i, 0, now); });
        }
    }

    void schedule_retry_ticks() {
        const double interval = config_.gateway.retry_interval_s;
        if (interval <= 0.0) return;
        queue_.schedule(interval, [this](double now) { retry_tick(now); });
    }

    void schedule_injections() {
        if (config_.outage.enabled()) {
            queue_.schedule(config_.outage.start_s,
                            [this](double) { gateway_.set_link_up(false); });
            queue_.schedule(config_.outage.start_s + config_.outage.duration_s,
                            [this](double) { gateway_.set_link_up(true); });
        }
        acks_to_drop_ = config_.drop_first_acks;
    }

    // -- node side -------------------------------------------------------------

    void node_cycle(std::size_t node_idx, int cycle, double now) {
        const NodeConfig& node = config_.nodes[node_idx];

        SensorReading reading = sample_sensors(
            node, config_.sim_start_epoch_s + now, config_.utc_offset_hours, rng_);
        for (const auto& e : config_.excursions) {
            if (e.node_id == node.node_id && now >= e.start_s &&
                now < e.start_s + e.duration_s)
                reading.temperature_c = e.temperature_c;
        }

        const std::size_t idx = records_.size();
        ReadingRecord rec;
        rec.node_id = node.node_id;
        rec.cycle = cycle;
        rec.sample_time_s = now;
        rec.temperature_c = reading.temperature_c;
        rec.humidity_pct = reading.humidity_pct;
        rec.light_pct = reading.light_pct;
        records_.push_back(rec);
        local_key_index_[reading_key(reading.node_id, reading.timestamp_local)] = idx;
        payloads_.push_back(encode_payload(reading));

        start_attempt(node_idx, idx, 1, now);

        const double next = now + node.sample_interval_s;
        if (next < config_.duration_s) {
            queue_.schedule(next, [this, node_idx, cycle](double t) {
                node_cycle(node_idx, cycle + 1, t);
            });
        }
    }

    void start_attempt(std::size_t node_idx, std::size_t idx, int attempt, double now) {
        const NodeConfig& node = config_.nodes[node_idx];
        records_[idx].attempts = attempt;

        const double air =
            rf::airtime_s(static_cast<int>(payloads_[idx].size()), config_.air);
        rf::TransmissionEvent event{node.node_id, now, air, node.distance_to_gateway_m,
                                    node.role.obstructions};

        double shadow_db = 0.0;
        if (config_.channel.shadowing_sigma_db > 0.0) {
            std::normal_distribution<double> shadow(0.0, config_.channel.shadowing_sigma_db);
            shadow_db = shadow(rng_);
        }
        double walls_db = 0.0;
        if (config_.channel.stochastic_walls) {
            std::uniform_real_distribution<double> per_pair(
                config_.channel.wall_pair_attenuation_min_db,
                config_.channel.wall_pair_attenuation_max_db);
            for (int p = 0; p < node.role.obstructions; ++p) walls_db += per_pair(rng_);
        } else {
            walls_db = node.role.obstructions * config_.channel.wall_pair_midpoint_db();
        }
        const double rssi = rf::received_power_dbm(event, config_.channel, shadow_db, walls_db);

        auto tx = std::make_shared<ActiveTx>();
        tx->node_idx = node_idx;
        tx->reading_idx = idx;
        tx->attempt = attempt;
        tx->start_s = now;
        tx->end_s = now + air;
        tx->rssi_dbm = rssi;
        // Any airtime overlap defeats both parties; there is no capture.
        for (auto& other : active_) {
            if (other->end_s > now) {
                other->collided = true;
                tx->collided = true;
            }
        }
        std::erase_if(active_, [now](const auto& t) { return t->end_s <= now; });
        active_.push_back(tx);

        queue_.schedule(tx->end_s, [this, tx](double t) { finish_attempt(tx, t); });
    }

    void finish_attempt(const std::shared_ptr<ActiveTx>& tx, double now) {
        ReadingRecord& rec = records_[tx->reading_idx];
        rec.rssi_dbm = tx->rssi_dbm;
        const bool received =
            !tx->collided && rf::delivery_outcome(tx->rssi_dbm, config_.channel);

        if (received) {
            settle_energy(tx->node_idx, rec);
            rec.latency.retry_delay_s = tx->start_s - rec.sample_time_s;
            rec.latency.lora_airtime_s = tx->end_s - tx->start_s;
            gateway_receive(tx->reading_idx, tx->rssi_dbm, now);
            return;
        }

        const NodeConfig& node = config_.nodes[tx->node_idx];
        if (tx->attempt < node.max_tx_retries) {
            const double next_start = tx->start_s + node.retry_backoff_s;
            const std::size_t node_idx = tx->node_idx;
            const std::size_t idx = tx->reading_idx;
            const int next_attempt = tx->attempt + 1;
            queue_.schedule(next_start, [this, node_idx, idx, next_attempt](double t) {
                start_attempt(node_idx, idx, next_attempt, t);
            });
            return;
        }
        rec.status =
            tx->collided ? ReadingStatus::LostCollision : ReadingStatus::LostRange;
        settle_energy(tx->node_idx, rec);
    }

    void settle_energy(std::size_t node_idx, ReadingRecord& rec) {
        const NodeConfig& node = config_.nodes[node_idx];
        rec.energy_mah =
            cycle_energy_mah(node.energy, node.sample_interval_s, rec.attempts - 1);
    }

    // -- gateway side ------------------------------------------------------------

    void gateway_receive(std::size_t idx, double rssi, double now) {
        auto result = gateway_.on_lora_receive(payloads_[idx], rssi, now, &rng_);
        if (result.rejection) {
            records_[idx].status = ReadingStatus::Rejected;
            return;
        }
        records_[idx].latency.gateway_processing_s = config_.gateway.processing_delay_s;
        const EnrichedReading enriched = *result.enriched;
        queue_.schedule(now + config_.gateway.processing_delay_s,
                        [this, idx, enriched](double t) {
                            auto actions = gateway_.publish(enriched, t);
                            if (actions.cached > 0) records_[idx].cached_at_s = t;
                            route_gateway_frames(actions.send, t);
                            schedule_gateway_resend_check();
                        });
    }

    void retry_tick(double now) {
        auto actions = gateway_.on_retry_tick(now);
        route_gateway_frames(actions.send, now);
        schedule_gateway_resend_check();
        const double next = now + config_.gateway.retry_interval_s;
        if (next <= config_.duration_s + config_.drain_grace_s)
            queue_.schedule(next, [this](double t) { retry_tick(t); });
    }

    void route_gateway_frames(const std::vector<mqtt::ControlPacket>& frames, double now) {
        for (const auto& packet : frames) {
            if (!gateway_.link_up()) continue;  // dropped on the wire; QoS 1 re-sends
            if (packet.type != mqtt::PacketType::PUBLISH) continue;
            const std::size_t idx = reading_index_for(packet.payload);
            ReadingRecord& rec = records_[idx];
            if (rec.cached_at_s >= 0.0 && rec.latency.queue_wait_s == 0.0)
                rec.latency.queue_wait_s = now - rec.cached_at_s;
            const double wifi = config_.latency.wifi_mqtt.sample(rng_);
            queue_.schedule(now + wifi, [this, packet, idx, wifi](double t) {
                broker_receive_from_gateway(packet, idx, wifi, t);
            });
        }
    }

    void broker_receive_from_gateway(const mqtt::ControlPacket& packet, std::size_t idx,
                                     double wifi, double now) {
        auto actions = broker_.on_packet(kGatewayConn, packet, now);
        for (const auto& frame : actions.send) {
            if (frame.conn == kGatewayConn) {
                if (frame.packet.type == mqtt::PacketType::PUBACK && acks_to_drop_ > 0) {
                    --acks_to_drop_;
                    continue;
                }
                const double back_wifi = config_.latency.wifi_mqtt.sample(rng_);
                const mqtt::ControlPacket ack = frame.packet;
                queue_.schedule(now + back_wifi, [this, ack](double t) {
                    gateway_.session().on_packet(ack, t);
                    schedule_gateway_resend_check();
                });
            } else if (frame.conn == kCloudConn &&
                       frame.packet.type == mqtt::PacketType::PUBLISH) {
                const mqtt::ControlPacket forwarded = frame.packet;
                queue_.schedule(now + config_.latency.broker_processing_s,
                                [this, forwarded, idx, wifi](double t) {
                                    cloud_receive(forwarded, idx, wifi, t);
                                });
            }
        }
        schedule_broker_resend_check();
    }

    // -- cloud side ----------------------------------------------------------------

    void cloud_receive(const mqtt::ControlPacket& packet, std::size_t idx, double wifi,
                       double now) {
        auto actions = service_.session().on_packet(packet, now);
        for (const auto& out : actions.send) {
            const mqtt::ControlPacket response = out;
            queue_.schedule(now + config_.latency.broker_processing_s,
                            [this, response](double t) {
                                broker_.on_packet(kCloudConn, response, t);
                                schedule_broker_resend_check();
                            });
        }
        for (auto& delivery : actions.deliveries) {
            const std::vector<std::uint8_t> payload = delivery.payload;
            queue_.schedule(now + config_.cloud.ingest_delay_s,
                            [this, payload, idx, wifi](double t) {
                                ingest_complete(payload, idx, wifi, t);
                            });
        }
    }

    void ingest_complete(const std::vector<std::uint8_t>& payload, std::size_t idx,
                         double wifi, double now) {
        const auto outcome = service_.ingest(payload, now);
        if (!outcome.stored) return;  // duplicate or malformed; the service counted it

        ReadingRecord& rec = records_[idx];
        rec.status = ReadingStatus::Delivered;
        rec.delivered_at_s = now;
        rec.latency.wifi_mqtt_s = wifi;
        rec.latency.broker_processing_s = config_.latency.broker_processing_s;
        rec.latency.cloud_ingest_s = config_.cloud.ingest_delay_s;
        rec.latency.residual_s = config_.latency.residual.sample(rng_);

        // Everything except the residual is event-driven, so the component
        // sum must reproduce the observed delivery delay exactly.
        const double modeled = rec.latency.total_s() - rec.latency.residual_s;
        if (std::abs((now - rec.sample_time_s) - modeled) > 1e-6)
            ++latency_identity_violations_;

        utc_key_index_[reading_key(outcome.enriched.reading.node_id,
                                   outcome.enriched.timestamp_utc)] = idx;
    }

    // -- QoS 1 redelivery -------------------------------------------------------------

    void schedule_gateway_resend_check() {
        const auto deadline = gateway_.session().next_resend_deadline();
        if (!deadline) return;
        const double t = std::max(*deadline, queue_.now());
        if (t >= next_gw_check_ - 1e-9) return;
        next_gw_check_ = t;
        queue_.schedule(t, [this](double now) {
            next_gw_check_ = std::numeric_limits<double>::infinity();
            route_gateway_frames(gateway_.on_elapsed(now), now);
            schedule_gateway_resend_check();
        });
    }

    void schedule_broker_resend_check() {
        const auto deadline = broker_.next_resend_deadline();
        if (!deadline) return;
        const double t = std::max(*deadline, queue_.now());
        if (t >= next_broker_check_ - 1e-9) return;
        next_broker_check_ = t;
        queue_.schedule(t, [this](double now) {
            next_broker_check_ = std::numeric_limits<double>::infinity();
            auto actions = broker_.on_elapsed(now);
            for (const auto& frame : actions.send) {
                if (frame.conn != kCloudConn ||
                    frame.packet.type != mqtt::PacketType::PUBLISH)
                    continue;
                const std::size_t idx = reading_index_for(frame.packet.payload);
                const mqtt::ControlPacket forwarded = frame.packet;
                queue_.schedule(now + config_.latency.broker_processing_s,
                                [this, forwarded, idx](double t2) {
                                    cloud_receive(forwarded, idx, 0.0, t2);
                                });
            }
            schedule_broker_resend_check();
        });
    }

    // -- bookkeeping ----------------------------------------------------------------------

    static std::string reading_key(const std::string& node_id, std::int64_t ts) {
        return node_id + "#" + std::to_string(ts);
    }

    std::size_t reading_index_for(const std::vector<std::uint8_t>& enriched_payload) const {
        const auto enriched = decode_enriched(enriched_payload);
        const auto it = local_key_index_.find(
            reading_key(enriched.reading.node_id, enriched.reading.timestamp_local));
        if (it == local_key_index_.end())
            throw std::logic_error("payload does not match any sampled reading");
        return it->second;
    }

    RunResult assemble() {
        RunResult result;
        MetricsReport& report = result.report;
        report.scenario = config_.name;
        report.seed = config_.seed;
        report.duration_s = config_.duration_s;

        std::map<std::string, NodeReport> per_node;
        for (const auto& node : config_.nodes) per_node[node.node_id].node_id = node.node_id;

        std::vector<double> latencies;
        for (const auto& rec : records_) {
            NodeReport& n = per_node[rec.node_id];
            ++n.packets_sent;
            n.attempts_total += rec.attempts;
            n.energy_mah += rec.energy_mah;
            switch (rec.status) {
                case ReadingStatus::Delivered:
                    ++n.delivered;
                    if (n.delivered == 1) {
                        n.rssi_min_dbm = n.rssi_max_dbm = rec.rssi_dbm;
                    } else {
                        n.rssi_min_dbm = std::min(n.rssi_min_dbm, rec.rssi_dbm);
                        n.rssi_max_dbm = std::max(n.rssi_max_dbm, rec.rssi_dbm);
                    }
                    n.rssi_mean_dbm += rec.rssi_dbm;
                    n.max_light_pct = std::max(n.max_light_pct, rec.light_pct);
                    latencies.push_back(rec.latency.total_s());
                    break;
                case ReadingStatus::LostRange: ++n.lost_range; break;
                case ReadingStatus::LostCollision: ++n.lost_collision; break;
                case ReadingStatus::Rejected: ++n.rejected; break;
                case ReadingStatus::InFlight: ++n.in_flight; break;
            }
        }

        for (const auto& node : config_.nodes) {
            NodeReport& n = per_node[node.node_id];
            if (n.delivered > 0) n.rssi_mean_dbm /= n.delivered;
            n.pdr = n.packets_sent > 0
                        ? static_cast<double>(n.delivered) / n.packets_sent
                        : 0.0;
            if (n.packets_sent > 0) {
                const double hours = n.packets_sent * node.sample_interval_s / 3600.0;
                n.avg_current_ma = n.energy_mah / hours;
                n.projected_life_hours =
                    n.avg_current_ma > 0.0
                        ? node.energy.battery_capacity_mah / n.avg_current_ma
                        : 0.0;
            }
            report.nodes.push_back(n);
            report.packets_sent += n.packets_sent;
            report.delivered += n.delivered;
            report.lost_range += n.lost_range;
            report.lost_collision += n.lost_collision;
            report.rejected += n.rejected;
            report.in_flight += n.in_flight;
        }
        report.pdr = report.packets_sent > 0
                         ? static_cast<double>(report.delivered) / report.packets_sent
                         : 0.0;
        report.conservation_ok =
            report.packets_sent == report.delivered + report.lost_range +
                                       report.lost_collision + report.rejected +
                                       report.in_flight;
        report.latency_identity_violations = latency_identity_violations_;
        report.latency = latency_stats(latencies.begin(), latencies.end());

        for (const auto& d : service_.dispatches()) {
            AlertRecord a;
            a.node_id = d.event.node_id;
            a.parameter = cloud::to_string(d.event.parameter);
            a.tier = cloud::to_string(d.event.tier);
            a.value = d.event.value;
            a.threshold_violated = d.event.threshold_violated;
            a.first_sample_ts = d.event.first_sample_ts;
            a.confirm_sample_ts = d.event.confirm_sample_ts;
            a.sink = d.sink_name;
            a.delivered = d.delivered;
            const auto it =
                utc_key_index_.find(reading_key(d.event.node_id, d.event.confirm_sample_ts));
            if (it != utc_key_index_.end())
                a.dispatch_latency_s = d.dispatched_at_s - records_[it->second].sample_time_s;
            report.alerts.push_back(std::move(a));
        }

        report.gateway.accepted = gateway_.accepted();
        report.gateway.rejected_malformed_json = gateway_.rejections().malformed_json;
        report.gateway.rejected_out_of_range = gateway_.rejections().out_of_range;
        report.gateway.rejected_timestamp_insane = gateway_.rejections().timestamp_insane;
        report.gateway.published = gateway_.published();
        report.gateway.cache_evictions = gateway_.overflow_evictions();
        report.gateway.cache_size_at_end = gateway_.cache_size();

        report.broker.publishes_received = broker_.stats().publishes_received;
        report.broker.publishes_forwarded = broker_.stats().publishes_forwarded;
        report.broker.resends = broker_.stats().resends;

        report.cloud.ingested = service_.counters().ingested;
        report.cloud.duplicates = service_.counters().duplicates;
        report.cloud.malformed = service_.counters().malformed;
        report.cloud.alerts_emitted = service_.counters().alerts_emitted;

        result.readings = records_;
        return result;
    }

    SimulationConfig config_;
    EventQueue queue_;
    std::mt19937_64 rng_;
    mqtt::BrokerCore broker_;
    gateway::Gateway gateway_;
    cloud::MemoryStore store_;
    cloud::CloudService service_;

    std::vector<ReadingRecord> records_;
    std::vector<std::vector<std::uint8_t>> payloads_;
    std::vector<std::shared_ptr<ActiveTx>> active_;
    std::map<std::string, std::size_t> local_key_index_;
    std::map<std::string, std::size_t> utc_key_index_;
    int acks_to_drop_ = 0;
    int latency_identity_violations_ = 0;
    double next_gw_check_ = std::numeric_limits<double>::infinity();
    double next_broker_check_ = std::numeric_limits<double>::infinity();
};

}  // namespace wagglenet::sim
