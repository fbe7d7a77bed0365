#pragma once

#include "ct/tokenizer.hpp"
#include "ct/weights.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ct {

enum class Component { hidden, mlp, attn };

const char* component_name(Component c);
Component component_from_name(const std::string& name);

/// Captured intermediate states of one forward pass: the residual stream
/// after each block, the MLP and attention block outputs, and the final
/// logits at every position.
struct ActivationTrace {
    int n_positions = 0;
    int n_layers = 0;
    int d_model = 0;
    int vocab_size = 0;

    // All three are indexed [layer][position][dim].
    std::vector<double> hidden;
    std::vector<double> mlp_out;
    std::vector<double> attn_out;
    // Indexed [position][vocab].
    std::vector<double> final_logits;

    std::span<const double> state(Component c, int layer, int position) const;
    std::span<double> state(Component c, int layer, int position);

    std::span<const double> logits(int position) const;
    /// Softmax of the logits at one position.
    std::vector<double> probabilities(int position) const;
    /// Probability of a single token at one position.
    double probability(int position, int token_id) const;
    int argmax(int position) const;

    /// Top-k (token_id, probability) pairs at a position, ties broken by
    /// lower token id.
    std::vector<std::pair<int, double>> topk(int position, int k) const;
};

/// One state to restore from a reference trace. For mlp/attn the patch
/// covers a window of layers around `layer`: radius 0 patches the single
/// layer, radius r patches layers [layer-r, layer-r+2r) clamped to the
/// model bounds. Hidden patches always cover exactly one state.
struct PatchEntry {
    int position = 0;
    int layer = 0;
    Component component = Component::hidden;
    int window_radius = 0;
};

/// Noise-and-patch plan for an intervened forward pass. Noise is drawn
/// i.i.d. N(0, noise_sigma^2) per embedding entry of the noise span, in
/// position-major order, from a generator seeded with noise_seed.
struct InterventionSpec {
    TokenSpan noise_span;
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
    std::vector<PatchEntry> patches;
};

/// Clean run: records all intermediate states during normal generation.
ActivationTrace forward_with_capture(const WeightBundle& weights,
                                     const std::vector<int>& token_ids);

/// Noised/patched run. Patched states are read from `reference` (normally
/// the clean trace of the same input) and substituted before downstream
/// computation continues. With noise_sigma = 0 and no patches this
/// reproduces forward_with_capture bit for bit.
ActivationTrace forward_with_intervention(const WeightBundle& weights,
                                          const std::vector<int>& token_ids,
                                          const InterventionSpec& spec,
                                          const ActivationTrace& reference);

/// Builds the tokenizer described by the bundle: whitespace/punctuation
/// splitting over the bundle's word vocabulary with byte fallback, or a
/// plain byte tokenizer when the bundle carries no word list.
std::unique_ptr<Tokenizer> make_tokenizer(const WeightBundle& weights);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace ct
