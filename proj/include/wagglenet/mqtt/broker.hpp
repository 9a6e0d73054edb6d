#pragma once

// Transport-agnostic broker core. Callers own the byte transport; the core
// consumes decoded packets plus a monotonic clock and emits frames to send
// and connections to close. At-least-once holds for QoS 1: an unacked
// outbound PUBLISH is redelivered with DUP set after resend_timeout_s.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wagglenet/mqtt/packet.hpp"
#include "wagglenet/mqtt/topic.hpp"

namespace wagglenet::mqtt {

struct BrokerOptions {
    double resend_timeout_s = 10.0;
};

struct OutboundFrame {
    std::uint64_t conn = 0;
    ControlPacket packet;
};

struct BrokerActions {
    std::vector<OutboundFrame> send;
    std::vector<std::uint64_t> close;

    void merge(BrokerActions&& other) {
        for (auto& f : other.send) send.push_back(std::move(f));
        for (auto c : other.close) close.push_back(c);
    }
};

class BrokerCore {
  public:
    struct Stats {
        std::uint64_t publishes_received = 0;
        std::uint64_t publishes_forwarded = 0;
        std::uint64_t pubacks_received = 0;
        std::uint64_t resends = 0;
        std::uint64_t protocol_violations = 0;
    };

    explicit BrokerCore(BrokerOptions options = {}) : options_(options) {}

    void on_connection_opened(std::uint64_t conn) { sessions_.emplace(conn, Session{}); }

    void on_connection_closed(std::uint64_t conn) { sessions_.erase(conn); }

    BrokerActions on_packet(std::uint64_t conn, const ControlPacket& p, double now_s) {
        BrokerActions actions;
        auto it = sessions_.find(conn);
        if (it == sessions_.end()) return actions;  // already closed
        Session& session = it->second;

        if (!session.connected && p.type != PacketType::CONNECT) {
            return violation(conn);
        }

        switch (p.type) {
            case PacketType::CONNECT: {
                if (session.connected) return violation(conn);  // duplicate CONNECT
                if (p.client_id.empty()) {
                    actions.send.push_back({conn, ControlPacket::make_connack(false, 0x02)});
                    actions.close.push_back(conn);
                    drop(conn);
                    return actions;
                }
                // A reconnect under the same id displaces the old session.
                for (auto& [other_conn, other] : sessions_) {
                    if (other_conn != conn && other.connected &&
                        other.client_id == p.client_id) {
                        actions.close.push_back(other_conn);
                        drop(other_conn);
                        break;
                    }
                }
                session.connected = true;
                session.client_id = p.client_id;
                actions.send.push_back({conn, ControlPacket::make_connack(false, 0x00)});
                return actions;
            }
            case PacketType::SUBSCRIBE: {
                std::vector<std::uint8_t> codes;
                codes.reserve(p.subscriptions.size());
                for (const auto& sub : p.subscriptions) {
                    if (!valid_topic_filter(sub.filter)) {
                        codes.push_back(0x80);
                        continue;
                    }
                    const std::uint8_t granted = std::min<std::uint8_t>(sub.qos, 1);
                    bool replaced = false;
                    for (auto& existing : session.subscriptions) {
                        if (existing.filter == sub.filter) {
                            existing.qos = granted;
                            replaced = true;
                            break;
                        }
                    }
                    if (!replaced) session.subscriptions.push_back({sub.filter, granted});
                    codes.push_back(granted);
                }
                actions.send.push_back({conn, ControlPacket::make_suback(p.packet_id, codes)});
                return actions;
            }
            case PacketType::PUBLISH: {
                if (!valid_topic_name(p.topic)) return violation(conn);
                ++stats_.publishes_received;
                if (p.qos == 1)
                    actions.send.push_back({conn, ControlPacket::make_puback(p.packet_id)});
                actions.merge(forward(p, now_s));
                return actions;
            }
            case PacketType::PUBACK: {
                ++stats_.pubacks_received;
                session.inflight.erase(p.packet_id);  // late or unknown acks are ignored
                return actions;
            }
            case PacketType::PINGREQ: {
                actions.send.push_back(
                    {conn, ControlPacket::make_simple(PacketType::PINGRESP)});
                return actions;
            }
            case PacketType::DISCONNECT: {
                actions.close.push_back(conn);
                drop(conn);
                return actions;
            }
            default:
                // CONNACK, SUBACK, PINGRESP flow broker-to-client only.
                return violation(conn);
        }
    }

    /// Redelivers every unacked QoS 1 publish whose deadline has passed.
    BrokerActions on_elapsed(double now_s) {
        BrokerActions actions;
        for (auto& [conn, session] : sessions_) {
            for (auto& [pid, inflight] : session.inflight) {
                if (inflight.deadline_s <= now_s) {
                    inflight.packet.dup = true;
                    inflight.deadline_s = now_s + options_.resend_timeout_s;
                    ++inflight.resend_count;
                    ++stats_.resends;
                    actions.send.push_back({conn, inflight.packet});
                }
            }
        }
        return actions;
    }

    /// Earliest pending resend deadline across all sessions, if any.
    std::optional<double> next_resend_deadline() const {
        std::optional<double> earliest;
        for (const auto& [conn, session] : sessions_) {
            for (const auto& [pid, inflight] : session.inflight) {
                if (!earliest || inflight.deadline_s < *earliest)
                    earliest = inflight.deadline_s;
            }
        }
        return earliest;
    }

    const Stats& stats() const { return stats_; }

    std::vector<std::string> connected_client_ids() const {
        std::vector<std::string> ids;
        for (const auto& [conn, session] : sessions_)
            if (session.connected) ids.push_back(session.client_id);
        return ids;
    }

    std::size_t inflight_count() const {
        std::size_t n = 0;
        for (const auto& [conn, session] : sessions_) n += session.inflight.size();
        return n;
    }

  private:
    struct Inflight {
        ControlPacket packet;
        double deadline_s = 0;
        int resend_count = 0;
    };

    struct Session {
        bool connected = false;
        std::string client_id;
        std::vector<TopicSubscription> subscriptions;
        std::map<std::uint16_t, Inflight> inflight;
        std::uint16_t next_packet_id = 1;
    };

    BrokerActions violation(std::uint64_t conn) {
        ++stats_.protocol_violations;
        BrokerActions actions;
        actions.close.push_back(conn);
        drop(conn);
        return actions;
    }

    void drop(std::uint64_t conn) { sessions_.erase(conn); }

    std::uint16_t allocate_packet_id(Session& session) {
        for (int i = 0; i < 65535; ++i) {
            const std::uint16_t candidate = session.next_packet_id;
            session.next_packet_id =
                session.next_packet_id == 65535 ? 1 : session.next_packet_id + 1;
            if (!session.inflight.count(candidate)) return candidate;
        }
        return session.next_packet_id;  // window exhausted; reuse is the lesser evil
    }

    /// One delivery per matching subscriber, at the highest granted QoS among
    /// its matching filters, capped by the publish QoS.
    BrokerActions forward(const ControlPacket& publish, double now_s) {
        BrokerActions actions;
        for (auto& [conn, session] : sessions_) {
            if (!session.connected) continue;
            int granted = -1;
            for (const auto& sub : session.subscriptions) {
                if (topic_matches(sub.filter, publish.topic))
                    granted = std::max(granted, static_cast<int>(sub.qos));
            }
            if (granted < 0) continue;
            const std::uint8_t out_qos =
                std::min<std::uint8_t>(publish.qos, static_cast<std::uint8_t>(granted));
            ControlPacket out = ControlPacket::make_publish(publish.topic, publish.payload,
                                                            out_qos);
            if (out_qos == 1) {
                out.packet_id = allocate_packet_id(session);
                session.inflight[out.packet_id] =
                    Inflight{out, now_s + options_.resend_timeout_s, 0};
            }
            ++stats_.publishes_forwarded;
            actions.send.push_back({conn, std::move(out)});
        }
        return actions;
    }

    BrokerOptions options_;
    std::map<std::uint64_t, Session> sessions_;
    Stats stats_;
};

}  // namespace wagglenet::mqtt
