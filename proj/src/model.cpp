#include "ct/model.hpp"

#include "ct/util.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ct {

const char* component_name(Component c) {
    switch (c) {
        case Component::hidden: return "hidden";
        case Component::mlp: return "mlp";
        case Component::attn: return "attn";
    }
    return "?";
}

Component component_from_name(const std::string& name) {
    if (name == "hidden") return Component::hidden;
    if (name == "mlp") return Component::mlp;
    if (name == "attn") return Component::attn;
    throw std::invalid_argument("unknown component: " + name);
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (double v : logits) max_logit = std::max(max_logit, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

namespace {

std::size_t state_index(const ActivationTrace& t, int layer, int position) {
    return (static_cast<std::size_t>(layer) * static_cast<std::size_t>(t.n_positions) +
            static_cast<std::size_t>(position)) *
           static_cast<std::size_t>(t.d_model);
}

}  // namespace

std::span<const double> ActivationTrace::state(Component c, int layer, int position) const {
    const std::vector<double>& store =
        c == Component::hidden ? hidden : (c == Component::mlp ? mlp_out : attn_out);
    return {store.data() + state_index(*this, layer, position), static_cast<std::size_t>(d_model)};
}

std::span<double> ActivationTrace::state(Component c, int layer, int position) {
    std::vector<double>& store =
        c == Component::hidden ? hidden : (c == Component::mlp ? mlp_out : attn_out);
    return {store.data() + state_index(*this, layer, position), static_cast<std::size_t>(d_model)};
}

std::span<const double> ActivationTrace::logits(int position) const {
    return {final_logits.data() + static_cast<std::size_t>(position) * static_cast<std::size_t>(vocab_size),
            static_cast<std::size_t>(vocab_size)};
}

std::vector<double> ActivationTrace::probabilities(int position) const {
    return softmax(logits(position));
}

double ActivationTrace::probability(int position, int token_id) const {
    if (token_id < 0 || token_id >= vocab_size) {
        throw std::out_of_range("probability: token id out of range");
    }
    return probabilities(position)[static_cast<std::size_t>(token_id)];
}

int ActivationTrace::argmax(int position) const {
    const auto row = logits(position);
    int best = 0;
    for (int v = 1; v < vocab_size; ++v) {
        if (row[static_cast<std::size_t>(v)] > row[static_cast<std::size_t>(best)]) best = v;
    }
    return best;
}

std::vector<std::pair<int, double>> ActivationTrace::topk(int position, int k) const {
    const std::vector<double> probs = probabilities(position);
    std::vector<int> ids(probs.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    const int kk = std::min<int>(k, static_cast<int>(ids.size()));
    std::partial_sort(ids.begin(), ids.begin() + kk, ids.end(), [&](int a, int b) {
        if (probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)]) {
            return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
        }
        return a < b;
    });
    std::vector<std::pair<int, double>> out;
    out.reserve(static_cast<std::size_t>(kk));
    for (int i = 0; i < kk; ++i) {
        out.emplace_back(ids[static_cast<std::size_t>(i)], probs[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])]);
    }
    return out;
}

namespace {

// GPT-2 tanh GELU.
inline double gelu(double x) {
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

// out[r][o] = b[o] + sum_k in[r][k] * w[k][o]
void linear(const double* in, int rows, int in_dim, const double* w, const double* b, int out_dim,
            double* out) {
    for (int r = 0; r < rows; ++r) {
        double* out_row = out + static_cast<std::size_t>(r) * out_dim;
        for (int o = 0; o < out_dim; ++o) out_row[o] = b ? b[o] : 0.0;
        const double* in_row = in + static_cast<std::size_t>(r) * in_dim;
        for (int k = 0; k < in_dim; ++k) {
            const double x = in_row[k];
            const double* w_row = w + static_cast<std::size_t>(k) * out_dim;
            for (int o = 0; o < out_dim; ++o) out_row[o] += x * w_row[o];
        }
    }
}

void layer_norm(const double* in, int rows, int dim, const double* gamma, const double* beta,
                double eps, double* out) {
    for (int r = 0; r < rows; ++r) {
        const double* x = in + static_cast<std::size_t>(r) * dim;
        double* y = out + static_cast<std::size_t>(r) * dim;
        double mean = 0.0;
        for (int j = 0; j < dim; ++j) mean += x[j];
        mean /= dim;
        double var = 0.0;
        for (int j = 0; j < dim; ++j) {
            const double diff = x[j] - mean;
            var += diff * diff;
        }
        var /= dim;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < dim; ++j) {
            y[j] = (x[j] - mean) * inv_std * gamma[j] + beta[j];
        }
    }
}

struct LayerView {
    const double* ln1_gamma;
    const double* ln1_beta;
    const double* w_qkv;
    const double* b_qkv;
    const double* w_attn_proj;
    const double* b_attn_proj;
    const double* ln2_gamma;
    const double* ln2_beta;
    const double* w_fc;
    const double* b_fc;
    const double* w_mlp_proj;
    const double* b_mlp_proj;
};

struct ModelView {
    const ModelConfig* config;
    const double* tok_emb;
    const double* pos_emb;
    std::vector<LayerView> layers;
    const double* ln_f_gamma;
    const double* ln_f_beta;
    const double* unembed;
};

ModelView resolve(const WeightBundle& w) {
    ModelView v;
    v.config = &w.config;
    v.tok_emb = w.tensor("tok_emb").data.data();
    v.pos_emb = w.tensor("pos_emb").data.data();
    for (int i = 0; i < w.config.n_layers; ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        LayerView l;
        l.ln1_gamma = w.tensor(p + "ln1.gamma").data.data();
        l.ln1_beta = w.tensor(p + "ln1.beta").data.data();
        l.w_qkv = w.tensor(p + "attn.w_qkv").data.data();
        l.b_qkv = w.tensor(p + "attn.b_qkv").data.data();
        l.w_attn_proj = w.tensor(p + "attn.w_proj").data.data();
        l.b_attn_proj = w.tensor(p + "attn.b_proj").data.data();
        l.ln2_gamma = w.tensor(p + "ln2.gamma").data.data();
        l.ln2_beta = w.tensor(p + "ln2.beta").data.data();
        l.w_fc = w.tensor(p + "mlp.w_fc").data.data();
        l.b_fc = w.tensor(p + "mlp.b_fc").data.data();
        l.w_mlp_proj = w.tensor(p + "mlp.w_proj").data.data();
        l.b_mlp_proj = w.tensor(p + "mlp.b_proj").data.data();
        v.layers.push_back(l);
    }
    v.ln_f_gamma = w.tensor("ln_f.gamma").data.data();
    v.ln_f_beta = w.tensor("ln_f.beta").data.data();
    v.unembed = w.tensor("unembed").data.data();
    return v;
}

// (layer, position) pairs to overwrite, expanded from patch windows.
struct PatchPlan {
    // flat flags [layer][position] per component
    std::vector<char> mlp;
    std::vector<char> attn;
    std::vector<char> hidden;

    bool any(const std::vector<char>& flags, int layer, int position, int n_positions) const {
        return flags[static_cast<std::size_t>(layer) * n_positions + position] != 0;
    }
};

PatchPlan expand_patches(const InterventionSpec& spec, int n_layers, int n_positions) {
    PatchPlan plan;
    const std::size_t cells = static_cast<std::size_t>(n_layers) * static_cast<std::size_t>(n_positions);
    plan.mlp.assign(cells, 0);
    plan.attn.assign(cells, 0);
    plan.hidden.assign(cells, 0);
    for (const PatchEntry& p : spec.patches) {
        if (p.position < 0 || p.position >= n_positions) {
            throw std::invalid_argument("patch position out of range");
        }
        if (p.layer < 0 || p.layer >= n_layers) {
            throw std::invalid_argument("patch layer out of range");
        }
        if (p.window_radius < 0) {
            throw std::invalid_argument("patch window_radius must be >= 0");
        }
        if (p.component == Component::hidden) {
            plan.hidden[static_cast<std::size_t>(p.layer) * n_positions + p.position] = 1;
            continue;
        }
        // Severing window: 2r layers starting at layer-r (one layer when
        // r = 0), clamped to the model bounds.
        const int span = std::max(1, 2 * p.window_radius);
        const int begin = std::max(0, p.layer - p.window_radius);
        const int end = std::min(n_layers, p.layer - p.window_radius + span);
        std::vector<char>& flags = p.component == Component::mlp ? plan.mlp : plan.attn;
        for (int l = begin; l < end; ++l) {
            flags[static_cast<std::size_t>(l) * n_positions + p.position] = 1;
        }
    }
    return plan;
}

void check_finite(const double* data, std::size_t count, int layer) {
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::isfinite(data[i])) {
            throw std::runtime_error("non-finite activation at layer " + std::to_string(layer));
        }
    }
}

ActivationTrace run_forward(const WeightBundle& weights, const std::vector<int>& token_ids,
                            const InterventionSpec* spec, const ActivationTrace* reference) {
    const ModelConfig& cfg = weights.config;
    cfg.validate();

    const int n_pos = static_cast<int>(token_ids.size());
    if (n_pos == 0) {
        throw std::invalid_argument("forward: empty token sequence");
    }
    if (n_pos > cfg.max_seq_len) {
        throw std::invalid_argument("forward: sequence of " + std::to_string(n_pos) +
                                    " tokens exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    }
    for (int id : token_ids) {
        if (id < 0 || id >= cfg.vocab_size) {
            throw std::invalid_argument("forward: token id out of range");
        }
    }

    PatchPlan plan;
    if (spec) {
        if (!reference) {
            throw std::invalid_argument("forward: intervention without reference trace");
        }
        if (reference->n_positions != n_pos || reference->n_layers != cfg.n_layers ||
            reference->d_model != cfg.d_model || reference->vocab_size != cfg.vocab_size) {
            throw std::invalid_argument("forward: reference trace shape mismatch");
        }
        if (!spec->noise_span.empty() &&
            (spec->noise_span.begin < 0 || spec->noise_span.end > n_pos)) {
            throw std::invalid_argument("forward: noise span out of range");
        }
        if (spec->noise_sigma < 0.0) {
            throw std::invalid_argument("forward: noise_sigma must be >= 0");
        }
        plan = expand_patches(*spec, cfg.n_layers, n_pos);
    }

    const ModelView m = resolve(weights);
    const int d = cfg.d_model;
    const int n_heads = cfg.n_heads;
    const int head_dim = cfg.head_dim();
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    ActivationTrace trace;
    trace.n_positions = n_pos;
    trace.n_layers = cfg.n_layers;
    trace.d_model = d;
    trace.vocab_size = cfg.vocab_size;
    const std::size_t per_comp = static_cast<std::size_t>(cfg.n_layers) * n_pos * d;
    trace.hidden.resize(per_comp);
    trace.mlp_out.resize(per_comp);
    trace.attn_out.resize(per_comp);
    trace.final_logits.resize(static_cast<std::size_t>(n_pos) * cfg.vocab_size);

    // Embeddings (+ optional subject noise).
    std::vector<double> x(static_cast<std::size_t>(n_pos) * d);
    for (int i = 0; i < n_pos; ++i) {
        const double* te = m.tok_emb + static_cast<std::size_t>(token_ids[static_cast<std::size_t>(i)]) * d;
        const double* pe = m.pos_emb + static_cast<std::size_t>(i) * d;
        double* row = x.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) row[j] = te[j] + pe[j];
    }
    if (spec && spec->noise_sigma > 0.0 && !spec->noise_span.empty()) {
        util::Rng rng(spec->noise_seed);
        for (int i = spec->noise_span.begin; i < spec->noise_span.end; ++i) {
            double* row = x.data() + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < d; ++j) {
                row[j] += spec->noise_sigma * util::gaussian(rng);
            }
        }
    }

    std::vector<double> normed(static_cast<std::size_t>(n_pos) * d);
    std::vector<double> qkv(static_cast<std::size_t>(n_pos) * 3 * d);
    std::vector<double> ctx(static_cast<std::size_t>(n_pos) * d);
    std::vector<double> scores(static_cast<std::size_t>(n_pos));
    std::vector<double> block_out(static_cast<std::size_t>(n_pos) * d);
    std::vector<double> mlp_hidden(static_cast<std::size_t>(n_pos) * cfg.d_mlp);

    for (int l = 0; l < cfg.n_layers; ++l) {
        const LayerView& lw = m.layers[static_cast<std::size_t>(l)];

        // Attention sub-block.
        layer_norm(x.data(), n_pos, d, lw.ln1_gamma, lw.ln1_beta, cfg.layernorm_epsilon, normed.data());
        linear(normed.data(), n_pos, d, lw.w_qkv, lw.b_qkv, 3 * d, qkv.data());
        for (int h = 0; h < n_heads; ++h) {
            const int off = h * head_dim;
            for (int i = 0; i < n_pos; ++i) {
                const double* q = qkv.data() + static_cast<std::size_t>(i) * 3 * d + off;
                double max_score = -std::numeric_limits<double>::infinity();
                for (int j = 0; j <= i; ++j) {
                    const double* k = qkv.data() + static_cast<std::size_t>(j) * 3 * d + d + off;
                    double s = 0.0;
                    for (int t = 0; t < head_dim; ++t) s += q[t] * k[t];
                    scores[static_cast<std::size_t>(j)] = s * attn_scale;
                    max_score = std::max(max_score, scores[static_cast<std::size_t>(j)]);
                }
                double denom = 0.0;
                for (int j = 0; j <= i; ++j) {
                    scores[static_cast<std::size_t>(j)] = std::exp(scores[static_cast<std::size_t>(j)] - max_score);
                    denom += scores[static_cast<std::size_t>(j)];
                }
                double* out = ctx.data() + static_cast<std::size_t>(i) * d + off;
                for (int t = 0; t < head_dim; ++t) out[t] = 0.0;
                for (int j = 0; j <= i; ++j) {
                    const double w = scores[static_cast<std::size_t>(j)] / denom;
                    const double* v = qkv.data() + static_cast<std::size_t>(j) * 3 * d + 2 * d + off;
                    for (int t = 0; t < head_dim; ++t) out[t] += w * v[t];
                }
            }
        }
        linear(ctx.data(), n_pos, d, lw.w_attn_proj, lw.b_attn_proj, d, block_out.data());

        for (int i = 0; i < n_pos; ++i) {
            double* row = block_out.data() + static_cast<std::size_t>(i) * d;
            if (spec && plan.any(plan.attn, l, i, n_pos)) {
                const auto ref = reference->state(Component::attn, l, i);
                std::copy(ref.begin(), ref.end(), row);
            }
            std::copy(row, row + d, trace.state(Component::attn, l, i).begin());
            double* xr = x.data() + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < d; ++j) xr[j] += row[j];
        }

        // MLP sub-block.
        layer_norm(x.data(), n_pos, d, lw.ln2_gamma, lw.ln2_beta, cfg.layernorm_epsilon, normed.data());
        linear(normed.data(), n_pos, d, lw.w_fc, lw.b_fc, cfg.d_mlp, mlp_hidden.data());
        for (double& v : mlp_hidden) v = gelu(v);
        linear(mlp_hidden.data(), n_pos, cfg.d_mlp, lw.w_mlp_proj, lw.b_mlp_proj, d, block_out.data());

        for (int i = 0; i < n_pos; ++i) {
            double* row = block_out.data() + static_cast<std::size_t>(i) * d;
            if (spec && plan.any(plan.mlp, l, i, n_pos)) {
                const auto ref = reference->state(Component::mlp, l, i);
                std::copy(ref.begin(), ref.end(), row);
            }
            std::copy(row, row + d, trace.state(Component::mlp, l, i).begin());
            double* xr = x.data() + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < d; ++j) xr[j] += row[j];
            if (spec && plan.any(plan.hidden, l, i, n_pos)) {
                const auto ref = reference->state(Component::hidden, l, i);
                std::copy(ref.begin(), ref.end(), xr);
            }
            std::copy(xr, xr + d, trace.state(Component::hidden, l, i).begin());
        }

        check_finite(x.data(), x.size(), l);
    }

    // Unembedding path: ln_f then projection to the vocabulary.
    layer_norm(x.data(), n_pos, d, m.ln_f_gamma, m.ln_f_beta, cfg.layernorm_epsilon, normed.data());
    linear(normed.data(), n_pos, d, m.unembed, nullptr, cfg.vocab_size, trace.final_logits.data());
    check_finite(trace.final_logits.data(), trace.final_logits.size(), cfg.n_layers);

    return trace;
}

}  // namespace

ActivationTrace forward_with_capture(const WeightBundle& weights, const std::vector<int>& token_ids) {
    return run_forward(weights, token_ids, nullptr, nullptr);
}

ActivationTrace forward_with_intervention(const WeightBundle& weights, const std::vector<int>& token_ids,
                                          const InterventionSpec& spec, const ActivationTrace& reference) {
    return run_forward(weights, token_ids, &spec, &reference);
}

std::unique_ptr<Tokenizer> make_tokenizer(const WeightBundle& weights) {
    if (weights.vocab_words.empty()) {
        return std::make_unique<WhitespaceTokenizer>();
    }
    return std::make_unique<WhitespaceTokenizer>(weights.vocab_words);
}

}  // namespace ct
