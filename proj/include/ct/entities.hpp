#pragma once

#include <set>
#include <string>

namespace ct {

/// Exact-label entity existence check (synthetic subjects must not name a
/// real entity).
class EntityChecker {
public:
    virtual ~EntityChecker() = default;
    virtual bool exists(const std::string& label) const = 0;
};

class LabelSetEntityChecker : public EntityChecker {
public:
    LabelSetEntityChecker() = default;
    explicit LabelSetEntityChecker(std::set<std::string> labels);
    /// One label per line, '#' comments.
    static LabelSetEntityChecker from_text(const std::string& content);

    bool exists(const std::string& label) const override;

private:
    std::set<std::string> labels_;
};

/// Client for a label-search endpoint:
///   GET {base_url}/exists?label={url-encoded label}
/// expecting {"found": true|false}.
class HttpEntityChecker : public EntityChecker {
public:
    explicit HttpEntityChecker(std::string base_url, int timeout_ms = 5000);
    bool exists(const std::string& label) const override;

private:
    std::string base_url_;
    int timeout_ms_;
};

}  // namespace ct
