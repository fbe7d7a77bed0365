#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ct {

/// Architecture hyperparameters of a pre-layernorm GPT-2 style decoder.
struct ModelConfig {
    int n_layers = 0;
    int d_model = 0;
    int n_heads = 0;
    int d_mlp = 0;
    int vocab_size = 0;
    int max_seq_len = 0;
    double layernorm_epsilon = 1e-5;

    int head_dim() const { return d_model / n_heads; }

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

struct TensorEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;  // row-major

    std::size_t element_count() const;
};

/// Immutable after load; shareable across threads for read-only inference.
struct WeightBundle {
    ModelConfig config;
    std::vector<TensorEntry> tensors;      // manifest order
    std::vector<std::string> vocab_words;  // optional word vocabulary (ids 256+)
    std::string checksum;                  // hex FNV-1a of the f32 payload

    const TensorEntry& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
};

/// The tensor manifest every bundle must carry, fully determined by config.
std::vector<std::pair<std::string, std::vector<int>>> expected_tensors(const ModelConfig& config);

/// Creates a bundle with all expected tensors zero-initialized.
WeightBundle make_empty_bundle(const ModelConfig& config);

// File format: one JSON header line (config, manifest, optional vocab),
// the raw little-endian float32 payloads in manifest order, then an 8-byte
// little-endian length followed by that many bytes of hex checksum.
void save_weights(const WeightBundle& bundle, const std::filesystem::path& path);
WeightBundle load_weights(const std::filesystem::path& path);

}  // namespace ct
