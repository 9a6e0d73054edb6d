#pragma once

// MQTT 3.1.1 control-packet subset with a bit-exact wire codec:
// CONNECT, CONNACK, PUBLISH, PUBACK, SUBSCRIBE, SUBACK, PINGREQ, PINGRESP,
// DISCONNECT. QoS 0 and 1 only. Every byte sequence either decodes to a
// valid packet or raises MalformedPacket; there is no third outcome.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wagglenet::mqtt {

struct MalformedPacket : std::runtime_error {
    explicit MalformedPacket(const std::string& what)
        : std::runtime_error("malformed packet: " + what) {}
};

enum class PacketType : std::uint8_t {
    CONNECT = 1,
    CONNACK = 2,
    PUBLISH = 3,
    PUBACK = 4,
    SUBSCRIBE = 8,
    SUBACK = 9,
    PINGREQ = 12,
    PINGRESP = 13,
    DISCONNECT = 14,
};

struct TopicSubscription {
    std::string filter;
    std::uint8_t qos = 0;
    bool operator==(const TopicSubscription&) const = default;
};

/// One parsed control packet. Only the fields relevant to the packet type
/// are meaningful; the codec leaves the rest default-initialized so
/// round-trips compare equal field-for-field.
struct ControlPacket {
    PacketType type = PacketType::PINGREQ;

    // PUBLISH
    bool dup = false;
    std::uint8_t qos = 0;
    bool retain = false;
    std::string topic;
    std::vector<std::uint8_t> payload;

    // PUBLISH (qos 1), PUBACK, SUBSCRIBE, SUBACK
    std::uint16_t packet_id = 0;

    // CONNECT
    std::string client_id;
    std::uint16_t keep_alive_s = 0;
    bool clean_session = true;

    // CONNACK
    bool session_present = false;
    std::uint8_t return_code = 0;

    // SUBSCRIBE / SUBACK
    std::vector<TopicSubscription> subscriptions;
    std::vector<std::uint8_t> suback_codes;

    bool operator==(const ControlPacket&) const = default;

    static ControlPacket make_connect(std::string client_id, std::uint16_t keep_alive_s = 60) {
        ControlPacket p;
        p.type = PacketType::CONNECT;
        p.client_id = std::move(client_id);
        p.keep_alive_s = keep_alive_s;
        return p;
    }
    static ControlPacket make_connack(bool session_present = false, std::uint8_t rc = 0) {
        ControlPacket p;
        p.type = PacketType::CONNACK;
        p.session_present = session_present;
        p.return_code = rc;
        return p;
    }
    static ControlPacket make_publish(std::string topic, std::vector<std::uint8_t> payload,
                                      std::uint8_t qos, std::uint16_t packet_id = 0,
                                      bool dup = false) {
        ControlPacket p;
        p.type = PacketType::PUBLISH;
        p.topic = std::move(topic);
        p.payload = std::move(payload);
        p.qos = qos;
        p.packet_id = packet_id;
        p.dup = dup;
        return p;
    }
    static ControlPacket make_puback(std::uint16_t packet_id) {
        ControlPacket p;
        p.type = PacketType::PUBACK;
        p.packet_id = packet_id;
        return p;
    }
    static ControlPacket make_subscribe(std::uint16_t packet_id,
                                        std::vector<TopicSubscription> subs) {
        ControlPacket p;
        p.type = PacketType::SUBSCRIBE;
        p.packet_id = packet_id;
        p.subscriptions = std::move(subs);
        return p;
    }
    static ControlPacket make_suback(std::uint16_t packet_id, std::vector<std::uint8_t> codes) {
        ControlPacket p;
        p.type = PacketType::SUBACK;
        p.packet_id = packet_id;
        p.suback_codes = std::move(codes);
        return p;
    }
    static ControlPacket make_simple(PacketType t) {
        ControlPacket p;
        p.type = t;
        return p;
    }
};

// ---------------------------------------------------------------------------
// Remaining-length varint: 7 bits per byte, continuation in the high bit,
// 1 to 4 bytes.

inline void encode_remaining_length(std::vector<std::uint8_t>& out, std::size_t len) {
    if (len > 268435455) throw MalformedPacket("remaining length exceeds protocol maximum");
    do {
        std::uint8_t byte = len % 128;
        len /= 128;
        if (len > 0) byte |= 0x80;
        out.push_back(byte);
    } while (len > 0);
}

/// Decodes starting at `idx`, advancing it past the varint.
inline std::size_t decode_remaining_length(const std::vector<std::uint8_t>& in, std::size_t& idx) {
    std::size_t value = 0;
    std::size_t multiplier = 1;
    for (int i = 0; i < 4; ++i) {
        if (idx >= in.size()) throw MalformedPacket("truncated remaining length");
        const std::uint8_t byte = in[idx++];
        value += static_cast<std::size_t>(byte & 0x7F) * multiplier;
        if ((byte & 0x80) == 0) return value;
        multiplier *= 128;
    }
    throw MalformedPacket("remaining length continuation past 4 bytes");
}

// ---------------------------------------------------------------------------
// Encoding

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

inline void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
    if (s.size() > 65535) throw MalformedPacket("string exceeds 65535 bytes");
    put_u16(out, static_cast<std::uint16_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

struct Cursor {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos;
    std::size_t end;

    std::uint8_t u8() {
        if (pos >= end) throw MalformedPacket("truncated packet");
        return buf[pos++];
    }
    std::uint16_t u16() {
        const std::uint16_t hi = u8();
        return static_cast<std::uint16_t>((hi << 8) | u8());
    }
    std::string string() {
        const std::uint16_t n = u16();
        if (pos + n > end) throw MalformedPacket("truncated string");
        std::string s(buf.begin() + pos, buf.begin() + pos + n);
        pos += n;
        return s;
    }
    std::vector<std::uint8_t> rest() {
        std::vector<std::uint8_t> r(buf.begin() + pos, buf.begin() + end);
        pos = end;
        return r;
    }
    bool done() const { return pos == end; }
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_packet(const ControlPacket& p) {
    std::vector<std::uint8_t> body;
    std::uint8_t flags = 0;
    switch (p.type) {
        case PacketType::CONNECT: {
            detail::put_string(body, "MQTT");
            body.push_back(0x04);  // protocol level 3.1.1
            body.push_back(p.clean_session ? 0x02 : 0x00);
            detail::put_u16(body, p.keep_alive_s);
            detail::put_string(body, p.client_id);
            break;
        }
        case PacketType::CONNACK: {
            body.push_back(p.session_present ? 0x01 : 0x00);
            body.push_back(p.return_code);
            break;
        }
        case PacketType::PUBLISH: {
            if (p.qos > 1) throw MalformedPacket("qos above subset maximum");
            if (p.qos == 1 && p.packet_id == 0)
                throw MalformedPacket("qos1 publish requires nonzero packet id");
            if (p.qos == 0 && p.dup) throw MalformedPacket("dup flag on qos0 publish");
            flags = static_cast<std::uint8_t>((p.dup ? 0x08 : 0) | (p.qos << 1) |
                                              (p.retain ? 0x01 : 0));
            detail::put_string(body, p.topic);
            if (p.qos > 0) detail::put_u16(body, p.packet_id);
            body.insert(body.end(), p.payload.begin(), p.payload.end());
            break;
        }
        case PacketType::PUBACK: {
            detail::put_u16(body, p.packet_id);
            break;
        }
        case PacketType::SUBSCRIBE: {
            if (p.subscriptions.empty()) throw MalformedPacket("subscribe without filters");
            flags = 0x02;  // mandated reserved flags
            detail::put_u16(body, p.packet_id);
            for (const auto& s : p.subscriptions) {
                if (s.qos > 1) throw MalformedPacket("requested qos above subset maximum");
                detail::put_string(body, s.filter);
                body.push_back(s.qos);
            }
            break;
        }
        case PacketType::SUBACK: {
            if (p.suback_codes.empty()) throw MalformedPacket("suback without return codes");
            detail::put_u16(body, p.packet_id);
            body.insert(body.end(), p.suback_codes.begin(), p.suback_codes.end());
            break;
        }
        case PacketType::PINGREQ:
        case PacketType::PINGRESP:
        case PacketType::DISCONNECT:
            break;
    }
    std::vector<std::uint8_t> out;
    out.reserve(body.size() + 5);
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint8_t>(p.type) << 4) | flags));
    encode_remaining_length(out, body.size());
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

/// Decode exactly one packet occupying the whole buffer.
inline ControlPacket decode_packet(const std::vector<std::uint8_t>& in) {
    std::size_t idx = 0;
    if (in.empty()) throw MalformedPacket("empty buffer");
    const std::uint8_t first = in[idx++];
    const std::uint8_t type_bits = first >> 4;
    const std::uint8_t flags = first & 0x0F;
    const std::size_t remaining = decode_remaining_length(in, idx);
    if (idx + remaining != in.size()) throw MalformedPacket("length does not match buffer");
    detail::Cursor c{in, idx, idx + remaining};

    ControlPacket p;
    switch (type_bits) {
        case 1: {
            if (flags != 0) throw MalformedPacket("reserved flags on CONNECT");
            p.type = PacketType::CONNECT;
            if (c.string() != "MQTT") throw MalformedPacket("unknown protocol name");
            if (c.u8() != 0x04) throw MalformedPacket("unsupported protocol level");
            const std::uint8_t connect_flags = c.u8();
            if (connect_flags & 0x01) throw MalformedPacket("reserved connect flag set");
            if (connect_flags & 0xFC)
                throw MalformedPacket("will/auth connect flags outside subset");
            p.clean_session = connect_flags & 0x02;
            p.keep_alive_s = c.u16();
            p.client_id = c.string();
            break;
        }
        case 2: {
            if (flags != 0) throw MalformedPacket("reserved flags on CONNACK");
            p.type = PacketType::CONNACK;
            const std::uint8_t ack_flags = c.u8();
            if (ack_flags & 0xFE) throw MalformedPacket("reserved connack flags");
            p.session_present = ack_flags & 0x01;
            p.return_code = c.u8();
            break;
        }
        case 3: {
            p.type = PacketType::PUBLISH;
            p.dup = flags & 0x08;
            p.qos = (flags >> 1) & 0x03;
            p.retain = flags & 0x01;
            if (p.qos == 3) throw MalformedPacket("invalid qos bits");
            if (p.qos > 1) throw MalformedPacket("qos above subset maximum");
            if (p.qos == 0 && p.dup) throw MalformedPacket("dup flag on qos0 publish");
            p.topic = c.string();
            if (p.qos > 0) {
                p.packet_id = c.u16();
                if (p.packet_id == 0) throw MalformedPacket("zero packet id on qos1 publish");
            }
            p.payload = c.rest();
            break;
        }
        case 4: {
            if (flags != 0) throw MalformedPacket("reserved flags on PUBACK");
            p.type = PacketType::PUBACK;
            p.packet_id = c.u16();
            break;
        }
        case 8: {
            if (flags != 0x02) throw MalformedPacket("bad reserved flags on SUBSCRIBE");
            p.type = PacketType::SUBSCRIBE;
            p.packet_id = c.u16();
            while (!c.done()) {
                TopicSubscription s;
                s.filter = c.string();
                s.qos = c.u8();
                if (s.qos > 1) throw MalformedPacket("requested qos above subset maximum");
                p.subscriptions.push_back(std::move(s));
            }
            if (p.subscriptions.empty()) throw MalformedPacket("subscribe without filters");
            break;
        }
        case 9: {
            if (flags != 0) throw MalformedPacket("reserved flags on SUBACK");
            p.type = PacketType::SUBACK;
            p.packet_id = c.u16();
            p.suback_codes = c.rest();
            if (p.suback_codes.empty()) throw MalformedPacket("suback without return codes");
            for (auto code : p.suback_codes)
                if (code > 1 && code != 0x80) throw MalformedPacket("invalid suback code");
            break;
        }
        case 12:
        case 13:
        case 14: {
            if (flags != 0) throw MalformedPacket("reserved flags");
            if (remaining != 0) throw MalformedPacket("unexpected payload");
            p.type = static_cast<PacketType>(type_bits);
            break;
        }
        default:
            throw MalformedPacket("reserved packet type " + std::to_string(type_bits));
    }
    if (!c.done()) throw MalformedPacket("trailing bytes");
    return p;
}

// ---------------------------------------------------------------------------
// Stream framing for byte transports

/// Accumulates bytes and yields complete frames. A frame is the fixed
/// header, the remaining-length varint and that many body bytes.
class FrameAssembler {
  public:
    void feed(const std::uint8_t* data, std::size_t n) {
        buffer_.insert(buffer_.end(), data, data + n);
    }

    /// Extracts the next complete frame, or nullopt when more bytes are needed.
    std::optional<std::vector<std::uint8_t>> next_frame() {
        if (buffer_.size() < 2) return std::nullopt;
        std::size_t idx = 1;
        std::size_t remaining = 0;
        std::size_t multiplier = 1;
        for (int i = 0; i < 4; ++i) {
            if (idx >= buffer_.size()) return std::nullopt;
            const std::uint8_t byte = buffer_[idx++];
            remaining += static_cast<std::size_t>(byte & 0x7F) * multiplier;
            if ((byte & 0x80) == 0) break;
            multiplier *= 128;
            if (i == 3) throw MalformedPacket("remaining length continuation past 4 bytes");
        }
        const std::size_t total = idx + remaining;
        if (buffer_.size() < total) return std::nullopt;
        std::vector<std::uint8_t> frame(buffer_.begin(), buffer_.begin() + total);
        buffer_.erase(buffer_.begin(), buffer_.begin() + total);
        return frame;
    }

  private:
    std::vector<std::uint8_t> buffer_;
};

}  // namespace wagglenet::mqtt
