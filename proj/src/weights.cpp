#include "ct/weights.hpp"

#include "ct/util.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ct {

using nlohmann::json;

void ModelConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("ModelConfig: ") + what);
    };
    require(n_layers >= 1, "n_layers must be >= 1");
    require(d_model >= 1, "d_model must be >= 1");
    require(n_heads >= 1, "n_heads must be >= 1");
    require(d_mlp >= 1, "d_mlp must be >= 1");
    require(vocab_size >= 1, "vocab_size must be >= 1");
    require(max_seq_len >= 2, "max_seq_len must be >= 2");
    require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
    require(layernorm_epsilon > 0.0, "layernorm_epsilon must be positive");
}

std::size_t TensorEntry::element_count() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

const TensorEntry& WeightBundle::tensor(const std::string& name) const {
    for (const TensorEntry& t : tensors) {
        if (t.name == name) return t;
    }
    throw std::out_of_range("WeightBundle: no tensor named " + name);
}

bool WeightBundle::has_tensor(const std::string& name) const {
    for (const TensorEntry& t : tensors) {
        if (t.name == name) return true;
    }
    return false;
}

std::vector<std::pair<std::string, std::vector<int>>> expected_tensors(const ModelConfig& c) {
    std::vector<std::pair<std::string, std::vector<int>>> out;
    const int d = c.d_model;
    const int m = c.d_mlp;
    out.push_back({"tok_emb", {c.vocab_size, d}});
    out.push_back({"pos_emb", {c.max_seq_len, d}});
    for (int i = 0; i < c.n_layers; ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        out.push_back({p + "ln1.gamma", {d}});
        out.push_back({p + "ln1.beta", {d}});
        out.push_back({p + "attn.w_qkv", {d, 3 * d}});
        out.push_back({p + "attn.b_qkv", {3 * d}});
        out.push_back({p + "attn.w_proj", {d, d}});
        out.push_back({p + "attn.b_proj", {d}});
        out.push_back({p + "ln2.gamma", {d}});
        out.push_back({p + "ln2.beta", {d}});
        out.push_back({p + "mlp.w_fc", {d, m}});
        out.push_back({p + "mlp.b_fc", {m}});
        out.push_back({p + "mlp.w_proj", {m, d}});
        out.push_back({p + "mlp.b_proj", {d}});
    }
    out.push_back({"ln_f.gamma", {d}});
    out.push_back({"ln_f.beta", {d}});
    out.push_back({"unembed", {d, c.vocab_size}});
    return out;
}

WeightBundle make_empty_bundle(const ModelConfig& config) {
    config.validate();
    WeightBundle bundle;
    bundle.config = config;
    for (const auto& [name, shape] : expected_tensors(config)) {
        TensorEntry t;
        t.name = name;
        t.shape = shape;
        t.data.assign(t.element_count(), 0.0);
        bundle.tensors.push_back(std::move(t));
    }
    return bundle;
}

namespace {

json config_to_json(const ModelConfig& c) {
    return json{{"n_layers", c.n_layers},
                {"d_model", c.d_model},
                {"n_heads", c.n_heads},
                {"d_mlp", c.d_mlp},
                {"vocab_size", c.vocab_size},
                {"max_seq_len", c.max_seq_len},
                {"layernorm_epsilon", c.layernorm_epsilon}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.n_layers = j.at("n_layers").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_mlp = j.at("d_mlp").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.layernorm_epsilon = j.at("layernorm_epsilon").get<double>();
    return c;
}

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out += static_cast<char>((v >> (8 * i)) & 0xff);
    }
}

std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

static_assert(sizeof(float) == 4);

void append_f32_le(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) {
        out += static_cast<char>((bits >> (8 * i)) & 0xff);
    }
}

float read_f32_le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) {
        bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    }
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

}  // namespace

void save_weights(const WeightBundle& bundle, const std::filesystem::path& path) {
    bundle.config.validate();

    json manifest = json::array();
    for (const TensorEntry& t : bundle.tensors) {
        manifest.push_back(json{{"name", t.name}, {"shape", t.shape}});
    }
    json header{{"format", "ct-weights-v1"},
                {"config", config_to_json(bundle.config)},
                {"tensors", manifest}};
    if (!bundle.vocab_words.empty()) {
        header["vocab"] = bundle.vocab_words;
    }

    std::string payload;
    for (const TensorEntry& t : bundle.tensors) {
        if (t.data.size() != t.element_count()) {
            throw std::invalid_argument("save_weights: tensor data does not match shape: " + t.name);
        }
        for (double v : t.data) {
            append_f32_le(payload, static_cast<float>(v));
        }
    }

    const std::string checksum = util::to_hex64(util::fnv1a64(payload.data(), payload.size()));

    std::string file;
    file += header.dump();
    file += '\n';
    file += payload;
    append_u64_le(file, checksum.size());
    file += checksum;

    util::atomic_write_file(path, file);
}

WeightBundle load_weights(const std::filesystem::path& path) {
    const std::string file = util::read_text_file(path);

    const std::size_t nl = file.find('\n');
    if (nl == std::string::npos) {
        throw std::runtime_error("load_weights: malformed header (no newline)");
    }

    json header;
    try {
        header = json::parse(file.substr(0, nl));
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("load_weights: malformed header: ") + e.what());
    }
    if (header.value("format", "") != "ct-weights-v1") {
        throw std::runtime_error("load_weights: unsupported format marker");
    }

    WeightBundle bundle;
    bundle.config = config_from_json(header.at("config"));
    bundle.config.validate();
    if (header.contains("vocab")) {
        bundle.vocab_words = header.at("vocab").get<std::vector<std::string>>();
        const int expected_vocab = 256 + static_cast<int>(bundle.vocab_words.size());
        if (bundle.config.vocab_size != expected_vocab) {
            throw std::runtime_error("load_weights: vocab_size does not match 256 byte tokens + word list");
        }
    }

    const auto expected = expected_tensors(bundle.config);
    const json& manifest = header.at("tensors");
    if (manifest.size() != expected.size()) {
        throw std::runtime_error("load_weights: manifest lists " + std::to_string(manifest.size()) +
                                 " tensors, config requires " + std::to_string(expected.size()));
    }

    const unsigned char* base = reinterpret_cast<const unsigned char*>(file.data());
    std::size_t offset = nl + 1;
    const std::size_t file_size = file.size();

    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& [exp_name, exp_shape] = expected[i];
        const std::string name = manifest[i].at("name").get<std::string>();
        const std::vector<int> shape = manifest[i].at("shape").get<std::vector<int>>();
        if (name != exp_name) {
            throw std::runtime_error("load_weights: unexpected tensor " + name + " (expected " + exp_name + ")");
        }
        if (shape != exp_shape) {
            throw std::runtime_error("load_weights: shape mismatch for tensor " + name);
        }
        TensorEntry t;
        t.name = name;
        t.shape = shape;
        const std::size_t count = t.element_count();
        if (offset + 4 * count > file_size) {
            throw std::runtime_error("load_weights: truncated payload in tensor " + name);
        }
        t.data.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            t.data[k] = static_cast<double>(read_f32_le(base + offset + 4 * k));
        }
        offset += 4 * count;
        bundle.tensors.push_back(std::move(t));
    }

    const std::size_t payload_end = offset;
    if (offset + 8 > file_size) {
        throw std::runtime_error("load_weights: missing checksum trailer");
    }
    const std::uint64_t checksum_len = read_u64_le(base + offset);
    offset += 8;
    if (offset + checksum_len != file_size) {
        throw std::runtime_error("load_weights: malformed checksum trailer");
    }
    const std::string stored_checksum = file.substr(offset, checksum_len);

    const std::size_t payload_begin = nl + 1;
    const std::string computed =
        util::to_hex64(util::fnv1a64(file.data() + payload_begin, payload_end - payload_begin));
    if (computed != stored_checksum) {
        throw std::runtime_error("load_weights: checksum mismatch (stored " + stored_checksum +
                                 ", computed " + computed + ")");
    }
    bundle.checksum = stored_checksum;
    return bundle;
}

}  // namespace ct
