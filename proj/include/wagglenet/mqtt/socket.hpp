#pragma once

// Loopback TCP transport for the broker core and the client session. The
// simulator drives the cores directly; this layer exists so the same state
// machines also run over real sockets.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "wagglenet/mqtt/broker.hpp"
#include "wagglenet/mqtt/client.hpp"
#include "wagglenet/mqtt/packet.hpp"

namespace wagglenet::mqtt {

namespace detail {

inline double steady_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

inline void send_all(int fd, const std::vector<std::uint8_t>& bytes) {
    std::size_t off = 0;
    while (off < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
        if (n <= 0) {
            if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
            throw std::runtime_error("socket send failed");
        }
        off += static_cast<std::size_t>(n);
    }
}

}  // namespace detail

/// Broker over a listening loopback socket, one service thread.
class SocketBroker {
  public:
    explicit SocketBroker(BrokerOptions options = {}) : core_(options) {}

    ~SocketBroker() { stop(); }

    /// Binds 127.0.0.1:port (0 picks an ephemeral port) and starts serving.
    void start(std::uint16_t port = 0) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
        const int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(port);
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw std::runtime_error("bind() failed");
        if (::listen(listen_fd_, 16) != 0) throw std::runtime_error("listen() failed");
        socklen_t len = sizeof(addr);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        running_ = true;
        thread_ = std::thread([this] { serve(); });
    }

    void stop() {
        running_ = false;
        if (thread_.joinable()) thread_.join();
        if (listen_fd_ >= 0) {
            ::close(listen_fd_);
            listen_fd_ = -1;
        }
    }

    std::uint16_t port() const { return port_; }

    BrokerCore::Stats stats() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return core_.stats();
    }

  private:
    struct Conn {
        int fd = -1;
        FrameAssembler assembler;
    };

    void serve() {
        std::uint64_t next_id = 1;
        std::map<std::uint64_t, Conn> conns;
        while (running_) {
            std::vector<pollfd> fds;
            std::vector<std::uint64_t> ids;
            fds.push_back({listen_fd_, POLLIN, 0});
            ids.push_back(0);
            for (const auto& [id, conn] : conns) {
                fds.push_back({conn.fd, POLLIN, 0});
                ids.push_back(id);
            }
            ::poll(fds.data(), fds.size(), 50);
            const double now = detail::steady_seconds();

            BrokerActions actions;
            if (fds[0].revents & POLLIN) {
                const int fd = ::accept(listen_fd_, nullptr, nullptr);
                if (fd >= 0) {
                    const std::uint64_t id = next_id++;
                    conns[id].fd = fd;
                    std::lock_guard<std::mutex> lock(mutex_);
                    core_.on_connection_opened(id);
                }
            }
            for (std::size_t i = 1; i < fds.size(); ++i) {
                if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
                const std::uint64_t id = ids[i];
                auto it = conns.find(id);
                if (it == conns.end()) continue;
                std::uint8_t buf[4096];
                const ssize_t n = ::recv(it->second.fd, buf, sizeof(buf), 0);
                if (n <= 0) {
                    close_conn(conns, id);
                    continue;
                }
                it->second.assembler.feed(buf, static_cast<std::size_t>(n));
                try {
                    while (auto frame = it->second.assembler.next_frame()) {
                        const ControlPacket packet = decode_packet(*frame);
                        std::lock_guard<std::mutex> lock(mutex_);
                        actions.merge(core_.on_packet(id, packet, now));
                    }
                } catch (const MalformedPacket&) {
                    close_conn(conns, id);
                }
            }
            {
                std::lock_guard<std::mutex> lock(mutex_);
                actions.merge(core_.on_elapsed(now));
            }
            for (const auto& frame : actions.send) {
                auto it = conns.find(frame.conn);
                if (it == conns.end()) continue;
                try {
                    detail::send_all(it->second.fd, encode_packet(frame.packet));
                } catch (const std::exception&) {
                    close_conn(conns, frame.conn);
                }
            }
            for (auto id : actions.close) close_conn(conns, id);
        }
        for (auto& [id, conn] : conns) ::close(conn.fd);
    }

    void close_conn(std::map<std::uint64_t, Conn>& conns, std::uint64_t id) {
        auto it = conns.find(id);
        if (it == conns.end()) return;
        ::close(it->second.fd);
        conns.erase(it);
        std::lock_guard<std::mutex> lock(mutex_);
        core_.on_connection_closed(id);
    }

    mutable std::mutex mutex_;
    BrokerCore core_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread thread_;
};

/// Blocking loopback client; every wait pumps the socket on the caller's
/// thread, so there is no background thread to synchronize with.
class SocketClient {
  public:
    SocketClient(const std::string& host, std::uint16_t port, ClientSession::Options options)
        : session_(std::move(options)) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw std::runtime_error("socket() failed");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
            throw std::runtime_error("bad address");
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw std::runtime_error("connect() failed");
    }

    ~SocketClient() {
        if (fd_ >= 0) ::close(fd_);
    }

    bool connect_and_wait(double timeout_s) {
        detail::send_all(fd_, encode_packet(session_.connect_packet()));
        const double deadline = detail::steady_seconds() + timeout_s;
        while (!session_.connected() && detail::steady_seconds() < deadline) {
            if (!pump(deadline)) return false;
        }
        return session_.connected();
    }

    bool subscribe(std::vector<TopicSubscription> subs, double timeout_s) {
        const ControlPacket packet = session_.subscribe_packet(std::move(subs));
        const std::uint16_t pid = packet.packet_id;
        detail::send_all(fd_, encode_packet(packet));
        const double deadline = detail::steady_seconds() + timeout_s;
        while (detail::steady_seconds() < deadline) {
            if (!pump(deadline)) return false;
            if (suback_ids_.count(pid)) return true;
        }
        return false;
    }

    bool publish_qos1(const std::string& topic, const std::vector<std::uint8_t>& payload,
                      double timeout_s) {
        const double now = detail::steady_seconds();
        const ControlPacket packet = session_.publish(topic, payload, 1, now);
        const std::uint16_t pid = packet.packet_id;
        detail::send_all(fd_, encode_packet(packet));
        const double deadline = now + timeout_s;
        while (detail::steady_seconds() < deadline) {
            if (!pump(deadline)) return false;
            if (acked_ids_.count(pid)) return true;
        }
        return false;
    }

    void publish_qos0(const std::string& topic, const std::vector<std::uint8_t>& payload) {
        detail::send_all(fd_, encode_packet(session_.publish(topic, payload, 0,
                                                             detail::steady_seconds())));
    }

    std::optional<ClientSession::Delivery> wait_for_message(double timeout_s) {
        const double deadline = detail::steady_seconds() + timeout_s;
        while (deliveries_.empty() && detail::steady_seconds() < deadline) {
            if (!pump(deadline)) break;
        }
        if (deliveries_.empty()) return std::nullopt;
        ClientSession::Delivery d = std::move(deliveries_.front());
        deliveries_.pop_front();
        return d;
    }

    void disconnect() {
        detail::send_all(fd_, encode_packet(ControlPacket::make_simple(PacketType::DISCONNECT)));
    }

  private:
    /// Reads whatever is available before the deadline and runs the session.
    /// Returns false once the peer has closed the connection.
    bool pump(double deadline) {
        pollfd pfd{fd_, POLLIN, 0};
        const double budget_s = deadline - detail::steady_seconds();
        const int timeout_ms = budget_s > 0 ? static_cast<int>(budget_s * 1000) + 1 : 0;
        const int rc = ::poll(&pfd, 1, std::min(timeout_ms, 50));
        if (rc <= 0) return true;
        std::uint8_t buf[4096];
        const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
        if (n <= 0) return false;
        assembler_.feed(buf, static_cast<std::size_t>(n));
        while (auto frame = assembler_.next_frame()) {
            const ControlPacket packet = decode_packet(*frame);
            if (packet.type == PacketType::SUBACK) suback_ids_.insert(packet.packet_id);
            auto actions = session_.on_packet(packet, detail::steady_seconds());
            for (const auto& out : actions.send) detail::send_all(fd_, encode_packet(out));
            for (auto pid : actions.acked_packet_ids) acked_ids_.insert(pid);
            for (auto& d : actions.deliveries) deliveries_.push_back(std::move(d));
        }
        return true;
    }

    ClientSession session_;
    FrameAssembler assembler_;
    int fd_ = -1;
    std::deque<ClientSession::Delivery> deliveries_;
    std::set<std::uint16_t> suback_ids_;
    std::set<std::uint16_t> acked_ids_;
};

}  // namespace wagglenet::mqtt
