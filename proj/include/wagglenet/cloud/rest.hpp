#pragma once

// HTTP/JSON API over the store and the alert service. Every endpoint
// requires a valid bearer token; errors are 401 (auth), 404 (unknown node),
// 400 (bad range or body).

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "wagglenet/cloud/auth.hpp"
#include "wagglenet/cloud/service.hpp"
#include "wagglenet/cloud/storage.hpp"

namespace wagglenet::cloud {

/// Demo sink that POSTs each alert to a registered URL.
class WebhookSink final : public NotificationSink {
  public:
    WebhookSink(std::string name, std::string host, int port, std::string path)
        : name_(std::move(name)), host_(std::move(host)), port_(port),
          path_(std::move(path)) {}

    const std::string& name() const override { return name_; }

    bool deliver(const AlertEvent& event) override {
        nlohmann::json body{{"node_id", event.node_id},
                            {"parameter", to_string(event.parameter)},
                            {"tier", to_string(event.tier)},
                            {"value", event.value},
                            {"threshold_violated", event.threshold_violated},
                            {"timestamp", event.confirm_sample_ts}};
        httplib::Client client(host_, port_);
        client.set_connection_timeout(2, 0);
        const auto res = client.Post(path_.c_str(), body.dump(), "application/json");
        return res && res->status >= 200 && res->status < 300;
    }

  private:
    std::string name_;
    std::string host_;
    int port_;
    std::string path_;
};

namespace detail {

inline nlohmann::json row_json(const StoredReading& row) {
    const auto& r = row.enriched.reading;
    return nlohmann::json{{"row_id", row.row_id},
                          {"node_id", r.node_id},
                          {"temperature", r.temperature_c},
                          {"humidity", r.humidity_pct},
                          {"light", r.light_pct},
                          {"latitude", r.latitude_deg},
                          {"longitude", r.longitude_deg},
                          {"altitude", r.altitude_m},
                          {"timestamp_local", r.timestamp_local},
                          {"timestamp_utc", row.enriched.timestamp_utc},
                          {"gateway_id", row.enriched.gateway_id},
                          {"rssi_dbm", row.enriched.rssi_dbm}};
}

inline std::optional<std::int64_t> parse_i64(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace detail

struct PortInUse : std::runtime_error {
    explicit PortInUse(std::uint16_t port)
        : std::runtime_error("cannot bind 127.0.0.1:" + std::to_string(port)) {}
};

class RestServer {
  public:
    RestServer(Store& store, CloudService& service, TokenAuthority& auth,
               std::function<std::int64_t()> now_utc =
                   [] {
                       return std::chrono::duration_cast<std::chrono::seconds>(
                                  std::chrono::system_clock::now().time_since_epoch())
                           .count();
                   })
        : store_(store), service_(service), auth_(auth), now_utc_(std::move(now_utc)) {
        // SO_REUSEADDR alone: rebinding a TIME_WAIT port is fine, but
        // sharing a port another live server holds (SO_REUSEPORT, the
        // httplib default) must fail so a busy port is reported, not split.
        server_.set_socket_options([](socket_t sock) {
            int opt = 1;
            ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR,
                         reinterpret_cast<const char*>(&opt), sizeof(opt));
        });
        install_routes();
    }

    ~RestServer() { stop(); }

    /// Binds 127.0.0.1 and serves on a thread. Port 0 picks an ephemeral
    /// port; a busy fixed port throws PortInUse.
    std::uint16_t start(std::uint16_t requested_port = 0) {
        if (requested_port == 0) {
            const int port = server_.bind_to_any_port("127.0.0.1");
            if (port <= 0) throw PortInUse(requested_port);
            port_ = static_cast<std::uint16_t>(port);
        } else {
            if (!server_.bind_to_port("127.0.0.1", requested_port))
                throw PortInUse(requested_port);
            port_ = requested_port;
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    std::uint16_t port() const { return port_; }

  private:
    bool authorize(const httplib::Request& req, httplib::Response& res) {
        const std::string header = req.get_header_value("Authorization");
        const std::string prefix = "Bearer ";
        if (header.rfind(prefix, 0) == 0) {
            if (auth_.verify(header.substr(prefix.size()), now_utc_())) return true;
        }
        res.status = 401;
        res.set_content(R"({"error":"unauthorized"})", "application/json");
        return false;
    }

    void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(2) + "\n", "application/json");
    }

    void install_routes() {
        server_.Get("/api/nodes", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorize(req, res)) return;
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& info : store_.nodes()) {
                nodes.push_back({{"node_id", info.node_id},
                                 {"first_seen_utc", info.first_seen_utc},
                                 {"last_seen_utc", info.last_seen_utc},
                                 {"reading_count", info.reading_count}});
            }
            send_json(res, {{"nodes", nodes}});
        });

        server_.Get(R"(/api/data/([^/]+))",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        if (!authorize(req, res)) return;
                        const std::string node_id = req.matches[1];
                        if (!store_.has_node(node_id)) {
                            send_json(res, {{"error", "unknown node"}}, 404);
                            return;
                        }
                        const auto start = detail::parse_i64(req.get_param_value("start"));
                        const auto end = detail::parse_i64(req.get_param_value("end"));
                        if (!start || !end || *start > *end) {
                            send_json(res, {{"error", "bad range"}}, 400);
                            return;
                        }
                        nlohmann::json rows = nlohmann::json::array();
                        for (const auto& row : store_.query_range(node_id, *start, *end))
                            rows.push_back(detail::row_json(row));
                        send_json(res, {{"node_id", node_id}, {"rows", rows}});
                    });

        server_.Get(R"(/api/latest/([^/]+))",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        if (!authorize(req, res)) return;
                        const std::string node_id = req.matches[1];
                        const auto row = store_.latest(node_id);
                        if (!row) {
                            send_json(res, {{"error", "unknown node"}}, 404);
                            return;
                        }
                        send_json(res, detail::row_json(*row));
                    });

        server_.Post("/api/alerts/subscribe",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         if (!authorize(req, res)) return;
                         nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
                         if (body.is_discarded() || !body.is_object() ||
                             !body.contains("name") || !body["name"].is_string()) {
                             send_json(res, {{"error", "bad registration"}}, 400);
                             return;
                         }
                         const std::string name = body["name"];
                         std::shared_ptr<NotificationSink> sink;
                         if (body.contains("webhook") && body["webhook"].is_object()) {
                             const auto& hook = body["webhook"];
                             if (!hook.contains("host") || !hook.contains("port") ||
                                 !hook.contains("path")) {
                                 send_json(res, {{"error", "bad registration"}}, 400);
                                 return;
                             }
                             sink = std::make_shared<WebhookSink>(
                                 name, hook["host"].get<std::string>(),
                                 hook["port"].get<int>(), hook["path"].get<std::string>());
                         } else {
                             sink = std::make_shared<RecordingSink>(name);
                         }
                         service_.register_sink(std::move(sink));
                         send_json(res, {{"registered", true}, {"sink", name}});
                     });
    }

    Store& store_;
    CloudService& service_;
    TokenAuthority& auth_;
    std::function<std::int64_t()> now_utc_;
    httplib::Server server_;
    std::thread thread_;
    std::uint16_t port_ = 0;
};

}  // namespace wagglenet::cloud
