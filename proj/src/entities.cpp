#include "ct/entities.hpp"

#include "ct/popularity.hpp"
#include "ct/util.hpp"

#include <httplib.h>
#include <json.hpp>

#include <stdexcept>

namespace ct {

LabelSetEntityChecker::LabelSetEntityChecker(std::set<std::string> labels)
    : labels_(std::move(labels)) {}

LabelSetEntityChecker LabelSetEntityChecker::from_text(const std::string& content) {
    std::set<std::string> labels;
    for (const std::string& line : util::split(content, '\n')) {
        const std::string label = util::trim(line);
        if (!label.empty() && label[0] != '#') labels.insert(label);
    }
    return LabelSetEntityChecker(std::move(labels));
}

bool LabelSetEntityChecker::exists(const std::string& label) const {
    return labels_.contains(label);
}

HttpEntityChecker::HttpEntityChecker(std::string base_url, int timeout_ms)
    : base_url_(std::move(base_url)), timeout_ms_(timeout_ms) {}

bool HttpEntityChecker::exists(const std::string& label) const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(0, timeout_ms_ * 1000);
    client.set_read_timeout(0, timeout_ms_ * 1000);
    const httplib::Result res = client.Get("/exists?label=" + url_encode(label));
    if (!res) {
        throw std::runtime_error("entity lookup failed for '" + label +
                                 "': " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw std::runtime_error("entity lookup for '" + label + "' returned status " +
                                 std::to_string(res->status));
    }
    return nlohmann::json::parse(res->body).at("found").get<bool>();
}

}  // namespace ct
