#pragma once

// Cold storage: gzip-compressed JSON, one file per node per day
// (<root>/<node_id>/<YYYY-MM-DD>.json.gz). The retention sweep moves rows
// older than the retention window out of the primary store; every archive
// write lands before any source row is deleted.

#include <zlib.h>

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wagglenet/cloud/storage.hpp"
#include "wagglenet/model.hpp"

namespace wagglenet::cloud {

struct ArchiveError : std::runtime_error {
    explicit ArchiveError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string utc_date_string(std::int64_t epoch_s) {
    const std::time_t t = static_cast<std::time_t>(epoch_s);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday);
    return buf;
}

class Archive {
  public:
    explicit Archive(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path day_path(const std::string& node_id, const std::string& date) const {
        return root_ / node_id / (date + ".json.gz");
    }

    /// Replaces the day file with the given rows (callers merge first).
    void write_day(const std::string& node_id, const std::string& date,
                   const std::vector<EnrichedReading>& rows) const {
        std::string body = "[";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0) body += ",";
            body += "\n";
            const auto bytes = encode_enriched(rows[i]);
            body.append(bytes.begin(), bytes.end());
        }
        body += "\n]\n";

        const std::filesystem::path path = day_path(node_id, date);
        std::filesystem::create_directories(path.parent_path());
        const std::filesystem::path tmp = path.string() + ".tmp";
        gzFile f = gzopen(tmp.c_str(), "wb");
        if (f == nullptr) throw ArchiveError("cannot open " + tmp.string());
        const int written = gzwrite(f, body.data(), static_cast<unsigned>(body.size()));
        const int rc = gzclose(f);
        if (written != static_cast<int>(body.size()) || rc != Z_OK) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw ArchiveError("short write to " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }

    bool day_exists(const std::string& node_id, const std::string& date) const {
        return std::filesystem::exists(day_path(node_id, date));
    }

    std::vector<EnrichedReading> read_day(const std::string& node_id,
                                                 const std::string& date) const {
        const std::filesystem::path path = day_path(node_id, date);
        gzFile f = gzopen(path.c_str(), "rb");
        if (f == nullptr) throw ArchiveError("cannot open " + path.string());
        std::string body;
        char buf[4096];
        int n;
        while ((n = gzread(f, buf, sizeof(buf))) > 0) body.append(buf, n);
        gzclose(f);
        if (n < 0) throw ArchiveError("decompression failed for " + path.string());

        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_array())
            throw ArchiveError("archive is not a JSON array: " + path.string());
        std::vector<EnrichedReading> rows;
        rows.reserve(j.size());
        for (const auto& element : j) rows.push_back(decode_enriched(element.dump()));
        return rows;
    }

  private:
    std::filesystem::path root_;
};

/// Moves rows with timestamp_utc strictly older than retention_days into the
/// archive. All day files are written (merging with any existing content)
/// before the primary rows are erased; a write failure leaves the store
/// untouched. Returns the number of rows archived.
inline std::size_t retention_sweep(Store& store, const Archive& archive,
                                   std::int64_t now_utc, int retention_days = 90) {
    const std::int64_t cutoff = now_utc - static_cast<std::int64_t>(retention_days) * 86400;
    const std::vector<StoredReading> rows = store.readings_before(cutoff);
    if (rows.empty()) return 0;

    std::map<std::pair<std::string, std::string>, std::vector<EnrichedReading>> days;
    for (const auto& row : rows)
        days[{row.enriched.reading.node_id, utc_date_string(row.enriched.timestamp_utc)}]
            .push_back(row.enriched);

    for (const auto& [key, fresh] : days) {
        const auto& [node_id, date] = key;
        std::map<std::int64_t, EnrichedReading> merged;
        if (archive.day_exists(node_id, date))
            for (auto& existing : archive.read_day(node_id, date))
                merged.emplace(existing.timestamp_utc, std::move(existing));
        for (const auto& r : fresh) merged.insert_or_assign(r.timestamp_utc, r);
        std::vector<EnrichedReading> ordered;
        ordered.reserve(merged.size());
        for (auto& [ts, r] : merged) ordered.push_back(std::move(r));
        archive.write_day(node_id, date, ordered);
    }

    const std::size_t erased = store.erase_before(cutoff);
    return erased;
}

}  // namespace wagglenet::cloud
