#pragma once

// Client-side session state machine, transport-agnostic like the broker
// core. QoS 1 publishes stay inflight until PUBACK and are redelivered with
// DUP after resend_timeout_s.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wagglenet/mqtt/packet.hpp"

namespace wagglenet::mqtt {

class ClientSession {
  public:
    struct Options {
        std::string client_id;
        std::uint16_t keep_alive_s = 60;
        double resend_timeout_s = 10.0;
    };

    struct Delivery {
        std::string topic;
        std::vector<std::uint8_t> payload;
        std::uint8_t qos = 0;
        bool dup = false;
    };

    struct Actions {
        std::vector<ControlPacket> send;
        std::vector<Delivery> deliveries;
        std::vector<std::uint16_t> acked_packet_ids;
        bool connection_refused = false;
    };

    explicit ClientSession(Options options) : options_(std::move(options)) {}

    ControlPacket connect_packet() const {
        return ControlPacket::make_connect(options_.client_id, options_.keep_alive_s);
    }

    ControlPacket subscribe_packet(std::vector<TopicSubscription> subs) {
        return ControlPacket::make_subscribe(allocate_packet_id(), std::move(subs));
    }

    /// Builds a PUBLISH; QoS 1 packets are tracked until acked.
    ControlPacket publish(std::string topic, std::vector<std::uint8_t> payload,
                          std::uint8_t qos, double now_s) {
        ControlPacket p = ControlPacket::make_publish(std::move(topic), std::move(payload),
                                                      qos, qos > 0 ? allocate_packet_id() : 0);
        if (qos == 1)
            inflight_[p.packet_id] = Inflight{p, now_s + options_.resend_timeout_s};
        return p;
    }

    Actions on_packet(const ControlPacket& p, double now_s) {
        Actions actions;
        switch (p.type) {
            case PacketType::CONNACK:
                if (p.return_code == 0) {
                    connected_ = true;
                } else {
                    actions.connection_refused = true;
                }
                break;
            case PacketType::PUBLISH: {
                if (p.qos == 1)
                    actions.send.push_back(ControlPacket::make_puback(p.packet_id));
                actions.deliveries.push_back({p.topic, p.payload, p.qos, p.dup});
                break;
            }
            case PacketType::PUBACK: {
                if (inflight_.erase(p.packet_id) > 0)
                    actions.acked_packet_ids.push_back(p.packet_id);
                break;
            }
            case PacketType::SUBACK:
            case PacketType::PINGRESP:
                break;
            default:
                break;  // server-bound types are not expected here
        }
        (void)now_s;
        return actions;
    }

    Actions on_elapsed(double now_s) {
        Actions actions;
        for (auto& [pid, inflight] : inflight_) {
            if (inflight.deadline_s <= now_s) {
                inflight.packet.dup = true;
                inflight.deadline_s = now_s + options_.resend_timeout_s;
                actions.send.push_back(inflight.packet);
            }
        }
        return actions;
    }

    std::optional<double> next_resend_deadline() const {
        std::optional<double> earliest;
        for (const auto& [pid, inflight] : inflight_)
            if (!earliest || inflight.deadline_s < *earliest) earliest = inflight.deadline_s;
        return earliest;
    }

    bool connected() const { return connected_; }
    std::size_t inflight_count() const { return inflight_.size(); }
    const std::string& client_id() const { return options_.client_id; }

  private:
    struct Inflight {
        ControlPacket packet;
        double deadline_s = 0;
    };

    std::uint16_t allocate_packet_id() {
        for (int i = 0; i < 65535; ++i) {
            const std::uint16_t candidate = next_packet_id_;
            next_packet_id_ = next_packet_id_ == 65535 ? 1 : next_packet_id_ + 1;
            if (!inflight_.count(candidate)) return candidate;
        }
        return next_packet_id_;
    }

    Options options_;
    bool connected_ = false;
    std::map<std::uint16_t, Inflight> inflight_;
    std::uint16_t next_packet_id_ = 1;
};

}  // namespace wagglenet::mqtt
