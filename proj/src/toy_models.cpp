#include "ct/toy_models.hpp"

#include "ct/model.hpp"
#include "ct/relations.hpp"
#include "ct/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace ct {

namespace {

void fill_gaussian(std::vector<double>& data, util::Rng& rng, double scale) {
    for (double& v : data) v = scale * util::gaussian(rng);
}

void fill_constant(std::vector<double>& data, double value) {
    std::fill(data.begin(), data.end(), value);
}

}  // namespace

WeightBundle make_random_bundle(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    WeightBundle bundle = make_empty_bundle(config);
    util::Rng rng(seed);
    const double mat_scale = 1.0 / std::sqrt(static_cast<double>(config.d_model));
    for (TensorEntry& t : bundle.tensors) {
        if (t.name.ends_with("gamma")) {
            fill_constant(t.data, 1.0);
        } else if (t.name.ends_with("beta") || t.name.find(".b_") != std::string::npos) {
            fill_constant(t.data, 0.0);
        } else if (t.name == "tok_emb" || t.name == "pos_emb") {
            fill_gaussian(t.data, rng, 0.5);
        } else {
            fill_gaussian(t.data, rng, mat_scale);
        }
    }
    return bundle;
}

namespace {

// Planted model geometry. The residual stream is partitioned into a dense
// subject-code block, one-hot object slots, one-hot position markers and
// a little slack.
constexpr int kDModel = 192;
constexpr int kSubjDims = 96;    // [0, 96): dense +-1 subject codes
constexpr int kObjBase = 96;     // [96, 146): object slots, one per fact
constexpr int kObjSlots = 50;
constexpr int kPosBase = 146;    // [146, 186): position markers
constexpr int kMaxSeq = 40;
constexpr int kDMlp = 64;
constexpr int kNLayers = 4;

constexpr double kPosMagnitude = 20.0;
constexpr double kBackgroundScale = 0.02;
constexpr double kCopyGain = 1.5;
constexpr double kQueryGain = 34.0;
constexpr double kUnembedGain = 2.5;

double* tensor_data(WeightBundle& b, const std::string& name) {
    for (TensorEntry& t : b.tensors) {
        if (t.name == name) return t.data.data();
    }
    throw std::out_of_range("planted model: no tensor " + name);
}

// A pronounceable single word: alternating consonant/vowel syllables.
std::string synth_word(util::Rng& rng, int syllables) {
    static const char* consonants = "bdfgklmnprstvz";
    static const char* vowels = "aeiou";
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w += consonants[util::uniform_below(rng, 14)];
        w += vowels[util::uniform_below(rng, 5)];
    }
    w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return w;
}

bool contains_either(const std::string& a, const std::string& b) {
    return a.find(b) != std::string::npos || b.find(a) != std::string::npos;
}

}  // namespace

PlantedModel make_planted_bundle(int n_facts, std::uint64_t seed) {
    if (n_facts < 1 || n_facts > kObjSlots) {
        throw std::invalid_argument("make_planted_bundle: n_facts must be in [1, 50]");
    }

    util::Rng rng(seed);

    // Subject and object names: unique words with no substring overlap
    // between any paired subject and object (keeps the lexical-overlap
    // filter quiet on planted datasets).
    std::set<std::string> used;
    std::vector<std::string> subjects;
    std::vector<std::string> objects;
    while (static_cast<int>(subjects.size()) < n_facts) {
        const std::string w = synth_word(rng, 3);
        if (used.insert(w).second) subjects.push_back(w);
    }
    while (static_cast<int>(objects.size()) < n_facts) {
        const std::string w = synth_word(rng, 2) + "land";
        if (!used.insert(w).second) continue;
        if (contains_either(subjects[objects.size()], w)) {
            used.erase(w);
            continue;
        }
        objects.push_back(w);
    }

    std::vector<std::string> vocab = subjects;
    vocab.insert(vocab.end(), objects.begin(), objects.end());
    for (const std::string& w : all_template_words()) {
        if (used.insert(w).second) vocab.push_back(w);
    }

    ModelConfig config;
    config.n_layers = kNLayers;
    config.d_model = kDModel;
    config.n_heads = 1;
    config.d_mlp = kDMlp;
    config.vocab_size = 256 + static_cast<int>(vocab.size());
    config.max_seq_len = kMaxSeq;
    config.layernorm_epsilon = 1e-5;

    PlantedModel model;
    model.bundle = make_empty_bundle(config);
    model.bundle.vocab_words = vocab;
    WeightBundle& b = model.bundle;

    for (TensorEntry& t : b.tensors) {
        if (t.name.ends_with("gamma")) fill_constant(t.data, 1.0);
    }

    const int d = kDModel;
    double* tok_emb = tensor_data(b, "tok_emb");
    double* pos_emb = tensor_data(b, "pos_emb");

    // Background embeddings: small dense noise for every token.
    {
        std::vector<double> bg(static_cast<std::size_t>(config.vocab_size) * d);
        fill_gaussian(bg, rng, kBackgroundScale);
        std::copy(bg.begin(), bg.end(), tok_emb);
    }

    // Subject codes: dense +-1 over the code block, zero elsewhere.
    std::vector<std::vector<double>> codes(static_cast<std::size_t>(n_facts));
    for (int k = 0; k < n_facts; ++k) {
        const int token = 256 + k;
        double* row = tok_emb + static_cast<std::size_t>(token) * d;
        std::fill(row, row + d, 0.0);
        codes[static_cast<std::size_t>(k)].resize(kSubjDims);
        for (int j = 0; j < kSubjDims; ++j) {
            const double sign = (rng() & 1) ? 1.0 : -1.0;
            row[j] = sign;
            codes[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = sign;
        }
        model.facts.push_back(PlantedFact{subjects[static_cast<std::size_t>(k)],
                                          objects[static_cast<std::size_t>(k)], token,
                                          256 + n_facts + k});
    }

    // Position markers.
    for (int i = 0; i < kMaxSeq; ++i) {
        double* row = pos_emb + static_cast<std::size_t>(i) * d;
        std::fill(row, row + d, 0.0);
        row[kPosBase + i] = kPosMagnitude;
    }

    // Lookup layer MLP: unit k detects subject k's code direction at the
    // normed residual and writes into object slot k. The firing threshold
    // sits well below the clean response and well above what subject noise
    // leaves of it.
    {
        const std::string p = "layers." + std::to_string(model.lookup_layer) + ".";
        double* w_fc = tensor_data(b, p + "mlp.w_fc");      // [d][d_mlp]
        double* b_fc = tensor_data(b, p + "mlp.b_fc");      // [d_mlp]
        double* w_proj = tensor_data(b, p + "mlp.w_proj");  // [d_mlp][d]

        // Exact clean pre-MLP residual at the subject position: embedding
        // plus position marker (earlier blocks are identically zero).
        double min_clean_dot = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n_facts; ++k) {
            std::vector<double> x(static_cast<std::size_t>(d), 0.0);
            const double* emb = tok_emb + static_cast<std::size_t>(256 + k) * d;
            for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(j)] = emb[j];
            x[kPosBase] += kPosMagnitude;
            double mean = 0.0;
            for (double v : x) mean += v;
            mean /= d;
            double var = 0.0;
            for (double v : x) var += (v - mean) * (v - mean);
            var /= d;
            const double inv_std = 1.0 / std::sqrt(var + config.layernorm_epsilon);
            double dot = 0.0;
            for (int j = 0; j < kSubjDims; ++j) {
                dot += codes[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] *
                       (x[static_cast<std::size_t>(j)] - mean) * inv_std;
            }
            min_clean_dot = std::min(min_clean_dot, dot);
        }
        const double threshold = 0.8 * min_clean_dot;

        for (int k = 0; k < n_facts; ++k) {
            for (int j = 0; j < kSubjDims; ++j) {
                w_fc[static_cast<std::size_t>(j) * kDMlp + k] =
                    codes[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            }
            b_fc[k] = -threshold;
            w_proj[static_cast<std::size_t>(k) * d + (kObjBase + k)] = 1.0;
        }
    }

    // Copy layer attention: a constant query (bias only) keyed on the
    // position-0 marker makes every position read from the subject token;
    // values and the output projection pass through the object slots only.
    {
        const std::string p = "layers." + std::to_string(model.copy_layer) + ".";
        double* w_qkv = tensor_data(b, p + "attn.w_qkv");    // [d][3d]
        double* b_qkv = tensor_data(b, p + "attn.b_qkv");    // [3d]
        double* w_proj = tensor_data(b, p + "attn.w_proj");  // [d][d]

        b_qkv[0] = kQueryGain;                                    // query
        w_qkv[static_cast<std::size_t>(kPosBase) * 3 * d + d] = 1.0;  // key <- position-0 marker
        for (int j = kObjBase; j < kObjBase + kObjSlots; ++j) {
            w_qkv[static_cast<std::size_t>(j) * 3 * d + 2 * d + j] = 1.0;  // value passthrough
            w_proj[static_cast<std::size_t>(j) * d + j] = kCopyGain;
        }
    }

    // Unembedding: object slot k drives the logit of object token k.
    {
        double* unembed = tensor_data(b, "unembed");  // [d][vocab]
        for (int k = 0; k < n_facts; ++k) {
            unembed[static_cast<std::size_t>(kObjBase + k) * config.vocab_size +
                    model.facts[static_cast<std::size_t>(k)].object_token] = kUnembedGain;
        }
    }

    // Verify the construction before handing it out.
    const auto tokenizer = make_tokenizer(b);
    for (const PlantedFact& fact : model.facts) {
        const std::string prompt = instantiate_prompt("[X] was created in [Y]", fact.subject);
        const TokenSequence seq = tokenizer->encode(prompt);
        const ActivationTrace trace = forward_with_capture(b, seq.token_ids);
        const int last = seq.size() - 1;
        if (trace.argmax(last) != fact.object_token ||
            trace.probability(last, fact.object_token) <= 0.5) {
            throw std::logic_error("make_planted_bundle: lookup verification failed for " + fact.subject);
        }
    }

    return model;
}

}  // namespace ct
