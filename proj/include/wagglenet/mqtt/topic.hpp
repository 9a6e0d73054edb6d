#pragma once

// Topic names and filters. '+' matches exactly one level, '#' matches any
// number of trailing levels (including none) and must be the final level.

#include <string>
#include <string_view>
#include <vector>

namespace wagglenet::mqtt {

inline std::vector<std::string_view> split_levels(std::string_view topic) {
    std::vector<std::string_view> levels;
    std::size_t start = 0;
    while (true) {
        const std::size_t slash = topic.find('/', start);
        if (slash == std::string_view::npos) {
            levels.push_back(topic.substr(start));
            return levels;
        }
        levels.push_back(topic.substr(start, slash - start));
        start = slash + 1;
    }
}

/// A publishable topic name: non-empty, no wildcard characters.
inline bool valid_topic_name(std::string_view topic) {
    if (topic.empty() || topic.size() > 65535) return false;
    return topic.find('+') == std::string_view::npos &&
           topic.find('#') == std::string_view::npos;
}

/// A subscription filter: wildcards only as whole levels, '#' only last.
inline bool valid_topic_filter(std::string_view filter) {
    if (filter.empty() || filter.size() > 65535) return false;
    const auto levels = split_levels(filter);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto level = levels[i];
        if (level == "+") continue;
        if (level == "#") {
            if (i + 1 != levels.size()) return false;
            continue;
        }
        if (level.find('+') != std::string_view::npos) return false;
        if (level.find('#') != std::string_view::npos) return false;
    }
    return true;
}

inline bool topic_matches(std::string_view filter, std::string_view topic) {
    const auto f = split_levels(filter);
    const auto t = split_levels(topic);
    std::size_t i = 0;
    for (; i < f.size(); ++i) {
        if (f[i] == "#") return true;  // covers the remaining levels, even zero
        if (i >= t.size()) return false;
        if (f[i] == "+") continue;
        if (f[i] != t[i]) return false;
    }
    return i == t.size();
}

}  // namespace wagglenet::mqtt
