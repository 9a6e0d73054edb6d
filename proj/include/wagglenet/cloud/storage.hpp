#pragma once

// Time-series persistence behind a small interface. The in-memory engine
// indexes rows by (node_id, timestamp_utc), which is also the dedup key for
// QoS 1 redelivery. All methods are safe to call from the API server thread
// while ingest runs.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "wagglenet/model.hpp"

namespace wagglenet::cloud {

struct StoredReading {
    std::uint64_t row_id = 0;
    EnrichedReading enriched;

    bool operator==(const StoredReading&) const = default;
};

struct NodeInfo {
    std::string node_id;
    std::int64_t first_seen_utc = 0;
    std::int64_t last_seen_utc = 0;
    std::uint64_t reading_count = 0;
};

class Store {
  public:
    virtual ~Store() = default;

    /// False when a row with the same (node_id, timestamp_utc) exists.
    virtual bool insert_reading(const EnrichedReading& enriched) = 0;

    /// Rows with start <= timestamp_utc <= end, ascending by timestamp.
    virtual std::vector<StoredReading> query_range(const std::string& node_id,
                                                   std::int64_t start,
                                                   std::int64_t end) const = 0;

    virtual std::optional<StoredReading> latest(const std::string& node_id) const = 0;

    virtual bool has_node(const std::string& node_id) const = 0;

    virtual std::vector<NodeInfo> nodes() const = 0;

    /// Rows strictly older than the cutoff, across all nodes, ascending.
    virtual std::vector<StoredReading> readings_before(std::int64_t cutoff_utc) const = 0;

    /// Deletes rows strictly older than the cutoff; returns how many.
    virtual std::size_t erase_before(std::int64_t cutoff_utc) = 0;

    virtual std::size_t reading_count() const = 0;
};

class MemoryStore final : public Store {
  public:
    bool insert_reading(const EnrichedReading& enriched) override {
        std::lock_guard<std::mutex> lock(mutex_);
        auto& per_node = rows_[enriched.reading.node_id];
        const auto [it, inserted] =
            per_node.try_emplace(enriched.timestamp_utc, StoredReading{next_row_id_, enriched});
        if (inserted) ++next_row_id_;
        return inserted;
    }

    std::vector<StoredReading> query_range(const std::string& node_id, std::int64_t start,
                                           std::int64_t end) const override {
        std::lock_guard<std::mutex> lock(mutex_);
        std::vector<StoredReading> out;
        const auto node_it = rows_.find(node_id);
        if (node_it == rows_.end()) return out;
        for (auto it = node_it->second.lower_bound(start);
             it != node_it->second.end() && it->first <= end; ++it)
            out.push_back(it->second);
        return out;
    }

    std::optional<StoredReading> latest(const std::string& node_id) const override {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto node_it = rows_.find(node_id);
        if (node_it == rows_.end() || node_it->second.empty()) return std::nullopt;
        return node_it->second.rbegin()->second;
    }

    bool has_node(const std::string& node_id) const override {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto it = rows_.find(node_id);
        return it != rows_.end() && !it->second.empty();
    }

    std::vector<NodeInfo> nodes() const override {
        std::lock_guard<std::mutex> lock(mutex_);
        std::vector<NodeInfo> out;
        for (const auto& [node_id, per_node] : rows_) {
            if (per_node.empty()) continue;
            NodeInfo info;
            info.node_id = node_id;
            info.first_seen_utc = per_node.begin()->first;
            info.last_seen_utc = per_node.rbegin()->first;
            info.reading_count = per_node.size();
            out.push_back(std::move(info));
        }
        return out;
    }

    std::vector<StoredReading> readings_before(std::int64_t cutoff_utc) const override {
        std::lock_guard<std::mutex> lock(mutex_);
        std::vector<StoredReading> out;
        for (const auto& [node_id, per_node] : rows_) {
            for (const auto& [ts, row] : per_node) {
                if (ts >= cutoff_utc) break;
                out.push_back(row);
            }
        }
        return out;
    }

    std::size_t erase_before(std::int64_t cutoff_utc) override {
        std::lock_guard<std::mutex> lock(mutex_);
        std::size_t erased = 0;
        for (auto& [node_id, per_node] : rows_) {
            auto end = per_node.lower_bound(cutoff_utc);
            erased += static_cast<std::size_t>(std::distance(per_node.begin(), end));
            per_node.erase(per_node.begin(), end);
        }
        return erased;
    }

    std::size_t reading_count() const override {
        std::lock_guard<std::mutex> lock(mutex_);
        std::size_t n = 0;
        for (const auto& [node_id, per_node] : rows_) n += per_node.size();
        return n;
    }

  private:
    mutable std::mutex mutex_;
    std::map<std::string, std::map<std::int64_t, StoredReading>> rows_;
    std::uint64_t next_row_id_ = 1;
};

}  // namespace wagglenet::cloud
