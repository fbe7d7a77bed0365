#pragma once

#include "ct/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace ct {

/// Run configuration: a versioned key-value file, overridable by CLI
/// flags. The effective config is echoed into every output manifest.
struct RunConfig {
    std::filesystem::path weights_path;
    std::string tokenizer = "auto";  // auto: word vocab from the weights when present
    std::uint64_t seed = 0;

    int n_noise_runs = 10;
    double noise_multiplier = 3.0;
    double noise_sigma = 0.0;  // 0: calibrate from the dataset subjects

    int confidence_threshold = 5;
    int topk_confidence = 3;
    int topk_bias = 10;
    long long popularity_threshold = 1000;

    std::string component = "mlp";  // reported significance component
    int window_radius = 5;
    bool normalized = true;
    std::string ci_method = "normal";  // normal | bootstrap

    // Probability stratification: aggregate only the n samples with the
    // highest (top) or lowest (bottom) clean-run probability.
    std::string stratify = "none";  // none | top | bottom
    int stratify_n = 0;

    static RunConfig from_string(const std::string& content);
    static RunConfig from_file(const std::filesystem::path& path);

    /// Applies a single "key = value" override; throws on unknown keys.
    void set(const std::string& key, const std::string& value);

    void validate() const;

    /// The logical configuration as JSON (no output paths).
    std::string echo_json() const;

    BuildParams build_params() const;
};

}  // namespace ct
