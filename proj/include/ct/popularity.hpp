#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace ct {

/// Subject -> annual page-view rate.
class PopularityProvider {
public:
    virtual ~PopularityProvider() = default;
    virtual std::optional<long long> views(const std::string& subject) const = 0;
};

/// In-memory table, also the backing for the TSV fixture format
/// ("subject<TAB>views" per line, '#' comments).
class MapPopularity : public PopularityProvider {
public:
    MapPopularity() = default;
    explicit MapPopularity(std::map<std::string, long long> table);
    static MapPopularity from_tsv(const std::string& content);

    std::optional<long long> views(const std::string& subject) const override;

private:
    std::map<std::string, long long> table_;
};

/// Client for a pageview-style endpoint:
///   GET {base_url}/views/{url-encoded subject}?year={year}
/// expecting {"views": N}. Responses are cached on disk when a cache
/// directory is configured.
class HttpPopularity : public PopularityProvider {
public:
    HttpPopularity(std::string base_url, int year = 2019, int timeout_ms = 5000,
                   std::filesystem::path cache_dir = {});

    std::optional<long long> views(const std::string& subject) const override;

private:
    std::string base_url_;
    int year_;
    int timeout_ms_;
    std::filesystem::path cache_dir_;
};

/// Missing records count as 0 views (unmemorized) and are reported once
/// through the warning callback.
class PopularityLookup {
public:
    explicit PopularityLookup(const PopularityProvider& provider,
                              std::function<void(const std::string&)> warn = {});

    long long views_or_zero(const std::string& subject) const;
    int missing_count() const { return missing_; }

private:
    const PopularityProvider& provider_;
    std::function<void(const std::string&)> warn_;
    mutable int missing_ = 0;
};

std::string url_encode(const std::string& text);

}  // namespace ct
