#pragma once

#include "ct/model.hpp"
#include "ct/weights.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ct {

/// One (query, traced token) pair to trace. The traced token is fixed
/// before any patching; by convention it is the clean-run top-1 token.
struct TraceTarget {
    std::vector<int> token_ids;
    TokenSpan subject_span;            // noised positions
    int traced_token = 0;              // o
    int n_noise_runs = 10;
    double noise_sigma = 0.0;
    std::uint64_t base_seed = 0;       // run i is seeded base_seed + i
    int window_radius = 5;             // severing window for mlp/attn patches
    std::vector<std::string> token_texts;  // optional, carried into exports
};

struct TotalEffect {
    double p_clean = 0.0;
    double p_noised = 0.0;
    double te = 0.0;
    double te_norm = 0.0;
};

/// p_noised is the mean over n_noise_runs independently seeded noised
/// runs; te = p_clean - p_noised and te_norm = te / p_clean.
/// Throws std::domain_error when p_clean is exactly zero (degenerate
/// traced token, te_norm undefined).
TotalEffect total_effect(const WeightBundle& weights, const TraceTarget& target);

/// 3 x the pooled population standard deviation of all embedding entries
/// of the given subjects' tokens (the multiplier is configurable).
double calibrate_noise(const WeightBundle& weights,
                       const std::vector<std::vector<int>>& subject_token_ids,
                       double multiplier = 3.0);

/// IE/NIE values for every (position, layer, component) cell of one query.
struct TraceGrid {
    int n_positions = 0;
    int n_layers = 0;
    TokenSpan subject_span;
    int traced_token = 0;
    std::vector<std::string> token_texts;

    // Indexed by cell_index(position, layer, component).
    std::vector<double> ie;
    std::vector<double> nie;  // ie / |te| clipped to [-1, 1]; zero when zero_te

    double p_clean = 0.0;
    double p_noised = 0.0;
    double te = 0.0;
    double te_norm = 0.0;
    bool zero_te = false;  // |te| < 1e-12: excluded from normalized aggregation

    std::size_t cell_index(int position, int layer, Component c) const;
    double ie_at(int position, int layer, Component c) const;
    double nie_at(int position, int layer, Component c) const;
};

/// Runs the full causal-tracing grid: one clean run, n noised runs, and
/// per cell the same noised runs with a single patch restored from the
/// clean trace. Noise seeds are shared across cells so cells differ only
/// by the patch. Cells are evaluated in parallel.
TraceGrid trace_grid(const WeightBundle& weights, const TraceTarget& target);

/// CSV with columns (position, token_text, layer, component, ie, nie,
/// p_clean, p_noised, te).
std::string grid_to_csv(const TraceGrid& grid);
TraceGrid grid_from_csv(const std::string& csv, TokenSpan subject_span, int traced_token);

/// Mean that preserves exactness when all inputs are bit-identical.
double mean_of(const std::vector<double>& values);

inline constexpr double kZeroTeEpsilon = 1e-12;

}  // namespace ct
