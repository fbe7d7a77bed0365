#include "ct/run_config.hpp"

#include "ct/util.hpp"

#include <json.hpp>

#include <stdexcept>

namespace ct {

using nlohmann::json;

RunConfig RunConfig::from_string(const std::string& content) {
    RunConfig config;
    int line_no = 0;
    bool version_seen = false;
    for (const std::string& raw : util::split(content, '\n')) {
        ++line_no;
        std::string line = raw;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = util::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
        }
        const std::string key = util::trim(line.substr(0, eq));
        const std::string value = util::trim(line.substr(eq + 1));
        if (key == "config_version") {
            if (value != "1") {
                throw std::runtime_error("config: unsupported config_version " + value);
            }
            version_seen = true;
            continue;
        }
        config.set(key, value);
    }
    if (!version_seen) {
        throw std::runtime_error("config: missing config_version");
    }
    config.validate();
    return config;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    return from_string(util::read_text_file(path));
}

namespace {

bool parse_bool(const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw std::runtime_error("config: expected a boolean, got '" + value + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "weights") {
        weights_path = value;
    } else if (key == "tokenizer") {
        tokenizer = value;
    } else if (key == "seed") {
        seed = std::stoull(value);
    } else if (key == "n_noise_runs") {
        n_noise_runs = std::stoi(value);
    } else if (key == "noise_multiplier") {
        noise_multiplier = std::stod(value);
    } else if (key == "noise_sigma") {
        noise_sigma = value == "auto" ? 0.0 : std::stod(value);
    } else if (key == "confidence_threshold") {
        confidence_threshold = std::stoi(value);
    } else if (key == "topk_confidence") {
        topk_confidence = std::stoi(value);
    } else if (key == "topk_bias") {
        topk_bias = std::stoi(value);
    } else if (key == "popularity_threshold") {
        popularity_threshold = std::stoll(value);
    } else if (key == "component") {
        component = value;
    } else if (key == "window_radius") {
        window_radius = std::stoi(value);
    } else if (key == "normalized") {
        normalized = parse_bool(value);
    } else if (key == "ci_method") {
        ci_method = value;
    } else if (key == "stratify") {
        stratify = value;
    } else if (key == "stratify_n") {
        stratify_n = std::stoi(value);
    } else {
        throw std::runtime_error("config: unknown key '" + key + "'");
    }
}

void RunConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::runtime_error(std::string("config: ") + what);
    };
    require(n_noise_runs >= 1, "n_noise_runs must be >= 1");
    require(noise_multiplier > 0.0, "noise_multiplier must be positive");
    require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
    require(confidence_threshold >= 1, "confidence_threshold must be positive");
    require(topk_confidence >= 1, "topk_confidence must be positive");
    require(topk_bias >= 1, "topk_bias must be positive");
    require(popularity_threshold >= 1, "popularity_threshold must be positive");
    require(window_radius >= 0, "window_radius must be >= 0");
    require(component == "hidden" || component == "mlp" || component == "attn",
            "component must be hidden, mlp or attn");
    require(ci_method == "normal" || ci_method == "bootstrap",
            "ci_method must be normal or bootstrap");
    require(stratify == "none" || stratify == "top" || stratify == "bottom",
            "stratify must be none, top or bottom");
    require(stratify == "none" || stratify_n >= 1,
            "stratify_n must be positive when stratifying");
    require(tokenizer == "auto" || tokenizer == "bytes", "tokenizer must be auto or bytes");
}

std::string RunConfig::echo_json() const {
    json j;
    j["config_version"] = 1;
    j["weights"] = weights_path.string();
    j["tokenizer"] = tokenizer;
    j["seed"] = seed;
    j["n_noise_runs"] = n_noise_runs;
    j["noise_multiplier"] = noise_multiplier;
    j["noise_sigma"] = noise_sigma;
    j["confidence_threshold"] = confidence_threshold;
    j["topk_confidence"] = topk_confidence;
    j["topk_bias"] = topk_bias;
    j["popularity_threshold"] = popularity_threshold;
    j["component"] = component;
    j["window_radius"] = window_radius;
    j["normalized"] = normalized;
    j["ci_method"] = ci_method;
    j["stratify"] = stratify;
    j["stratify_n"] = stratify_n;
    return j.dump();
}

BuildParams RunConfig::build_params() const {
    BuildParams params;
    params.topk_confidence = topk_confidence;
    params.confidence_threshold = confidence_threshold;
    params.popularity_threshold = popularity_threshold;
    params.probe_topk = topk_bias;
    return params;
}

}  // namespace ct
