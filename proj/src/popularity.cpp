#include "ct/popularity.hpp"

#include "ct/util.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdio>
#include <stdexcept>

namespace ct {

MapPopularity::MapPopularity(std::map<std::string, long long> table) : table_(std::move(table)) {}

MapPopularity MapPopularity::from_tsv(const std::string& content) {
    std::map<std::string, long long> table;
    int line_no = 0;
    for (const std::string& line : util::split(content, '\n')) {
        ++line_no;
        const std::string trimmed = util::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto fields = util::split(line, '\t');
        if (fields.size() != 2) {
            throw std::runtime_error("popularity tsv: line " + std::to_string(line_no) +
                                     " does not have 2 tab-separated fields");
        }
        const long long views = std::stoll(util::trim(fields[1]));
        if (views < 0) {
            throw std::runtime_error("popularity tsv: line " + std::to_string(line_no) +
                                     " has negative views");
        }
        table[util::trim(fields[0])] = views;
    }
    return MapPopularity(std::move(table));
}

std::optional<long long> MapPopularity::views(const std::string& subject) const {
    const auto it = table_.find(subject);
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

std::string url_encode(const std::string& text) {
    std::string out;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            char buf[4];
            std::snprintf(buf, sizeof(buf), "%%%02X", c);
            out += buf;
        }
    }
    return out;
}

HttpPopularity::HttpPopularity(std::string base_url, int year, int timeout_ms,
                               std::filesystem::path cache_dir)
    : base_url_(std::move(base_url)), year_(year), timeout_ms_(timeout_ms),
      cache_dir_(std::move(cache_dir)) {}

std::optional<long long> HttpPopularity::views(const std::string& subject) const {
    namespace fs = std::filesystem;

    fs::path cache_file;
    if (!cache_dir_.empty()) {
        cache_file = cache_dir_ / (util::to_hex64(util::fnv1a64(subject.data(), subject.size())) +
                                   "_" + std::to_string(year_) + ".json");
        if (fs::exists(cache_file)) {
            const auto body = nlohmann::json::parse(util::read_text_file(cache_file));
            if (body.contains("views")) return body.at("views").get<long long>();
            return std::nullopt;
        }
    }

    httplib::Client client(base_url_);
    client.set_connection_timeout(0, timeout_ms_ * 1000);
    client.set_read_timeout(0, timeout_ms_ * 1000);
    const std::string path = "/views/" + url_encode(subject) + "?year=" + std::to_string(year_);
    const httplib::Result res = client.Get(path);
    if (!res) {
        throw std::runtime_error("popularity request failed for '" + subject +
                                 "': " + httplib::to_string(res.error()));
    }
    if (res->status == 404) {
        if (!cache_file.empty()) util::atomic_write_file(cache_file, "{}");
        return std::nullopt;
    }
    if (res->status != 200) {
        throw std::runtime_error("popularity request for '" + subject + "' returned status " +
                                 std::to_string(res->status));
    }
    const auto body = nlohmann::json::parse(res->body);
    const long long views = body.at("views").get<long long>();
    if (!cache_file.empty()) {
        util::atomic_write_file(cache_file, body.dump());
    }
    return views;
}

PopularityLookup::PopularityLookup(const PopularityProvider& provider,
                                   std::function<void(const std::string&)> warn)
    : provider_(provider), warn_(std::move(warn)) {}

long long PopularityLookup::views_or_zero(const std::string& subject) const {
    const auto v = provider_.views(subject);
    if (v) return *v;
    ++missing_;
    if (warn_) warn_("no popularity record for '" + subject + "', treating as 0 views");
    return 0;
}

}  // namespace ct
