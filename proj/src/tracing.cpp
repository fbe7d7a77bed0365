#include "ct/tracing.hpp"

#include "ct/util.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ct {

double mean_of(const std::vector<double>& values) {
    if (values.empty()) {
        throw std::invalid_argument("mean_of: empty input");
    }
    const bool all_equal =
        std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
    if (all_equal) {
        return values.front();
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

namespace {

void validate_target(const WeightBundle& weights, const TraceTarget& target) {
    if (target.token_ids.empty()) {
        throw std::invalid_argument("trace target: empty token sequence");
    }
    if (target.traced_token < 0 || target.traced_token >= weights.config.vocab_size) {
        throw std::invalid_argument("trace target: traced token outside vocabulary");
    }
    if (target.n_noise_runs < 1) {
        throw std::invalid_argument("trace target: n_noise_runs must be >= 1");
    }
    if (target.noise_sigma < 0.0) {
        throw std::invalid_argument("trace target: noise_sigma must be >= 0");
    }
    const int n = static_cast<int>(target.token_ids.size());
    if (target.subject_span.begin < 0 || target.subject_span.end > n ||
        target.subject_span.empty()) {
        throw std::invalid_argument("trace target: subject span out of range");
    }
}

InterventionSpec noise_spec(const TraceTarget& target, int run_index) {
    InterventionSpec spec;
    spec.noise_span = target.subject_span;
    spec.noise_sigma = target.noise_sigma;
    spec.noise_seed = target.base_seed + static_cast<std::uint64_t>(run_index);
    return spec;
}

}  // namespace

TotalEffect total_effect(const WeightBundle& weights, const TraceTarget& target) {
    validate_target(weights, target);

    const ActivationTrace clean = forward_with_capture(weights, target.token_ids);
    const int last = clean.n_positions - 1;

    TotalEffect out;
    out.p_clean = clean.probability(last, target.traced_token);

    if (target.noise_sigma == 0.0) {
        // A zero-sigma noised run reproduces the clean run bit for bit.
        out.p_noised = out.p_clean;
    } else {
        std::vector<double> runs(static_cast<std::size_t>(target.n_noise_runs));
        for (int i = 0; i < target.n_noise_runs; ++i) {
            const ActivationTrace noised =
                forward_with_intervention(weights, target.token_ids, noise_spec(target, i), clean);
            runs[static_cast<std::size_t>(i)] = noised.probability(last, target.traced_token);
        }
        out.p_noised = mean_of(runs);
    }

    out.te = out.p_clean - out.p_noised;
    if (out.p_clean == 0.0) {
        throw std::domain_error("total_effect: p_clean is zero, te_norm undefined");
    }
    out.te_norm = out.te / out.p_clean;
    return out;
}

double calibrate_noise(const WeightBundle& weights,
                       const std::vector<std::vector<int>>& subject_token_ids,
                       double multiplier) {
    if (subject_token_ids.empty()) {
        throw std::invalid_argument("calibrate_noise: empty subject list");
    }
    const TensorEntry& emb = weights.tensor("tok_emb");
    const int d = weights.config.d_model;

    // Pooled population standard deviation over every embedding entry of
    // every subject token.
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (const std::vector<int>& tokens : subject_token_ids) {
        for (int id : tokens) {
            if (id < 0 || id >= weights.config.vocab_size) {
                throw std::invalid_argument("calibrate_noise: token id out of range");
            }
            const double* row = emb.data.data() + static_cast<std::size_t>(id) * d;
            for (int j = 0; j < d; ++j) {
                sum += row[j];
                sum_sq += row[j] * row[j];
            }
            count += static_cast<std::size_t>(d);
        }
    }
    if (count == 0) {
        throw std::invalid_argument("calibrate_noise: subjects contain no tokens");
    }
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean);
    return multiplier * std::sqrt(var);
}

std::size_t TraceGrid::cell_index(int position, int layer, Component c) const {
    return (static_cast<std::size_t>(position) * static_cast<std::size_t>(n_layers) +
            static_cast<std::size_t>(layer)) *
               3 +
           static_cast<std::size_t>(c);
}

double TraceGrid::ie_at(int position, int layer, Component c) const {
    return ie[cell_index(position, layer, c)];
}

double TraceGrid::nie_at(int position, int layer, Component c) const {
    return nie[cell_index(position, layer, c)];
}

TraceGrid trace_grid(const WeightBundle& weights, const TraceTarget& target) {
    validate_target(weights, target);

    const ActivationTrace clean = forward_with_capture(weights, target.token_ids);
    const int n_pos = clean.n_positions;
    const int n_layers = clean.n_layers;
    const int last = n_pos - 1;

    TraceGrid grid;
    grid.n_positions = n_pos;
    grid.n_layers = n_layers;
    grid.subject_span = target.subject_span;
    grid.traced_token = target.traced_token;
    grid.token_texts = target.token_texts;
    grid.p_clean = clean.probability(last, target.traced_token);

    std::vector<double> noised_runs(static_cast<std::size_t>(target.n_noise_runs));
    if (target.noise_sigma == 0.0) {
        std::fill(noised_runs.begin(), noised_runs.end(), grid.p_clean);
    } else {
        for (int i = 0; i < target.n_noise_runs; ++i) {
            const ActivationTrace noised =
                forward_with_intervention(weights, target.token_ids, noise_spec(target, i), clean);
            noised_runs[static_cast<std::size_t>(i)] = noised.probability(last, target.traced_token);
        }
    }
    grid.p_noised = mean_of(noised_runs);
    grid.te = grid.p_clean - grid.p_noised;
    grid.te_norm = grid.p_clean > 0.0 ? grid.te / grid.p_clean : 0.0;
    grid.zero_te = std::abs(grid.te) < kZeroTeEpsilon;

    const std::size_t n_cells = static_cast<std::size_t>(n_pos) * n_layers * 3;
    grid.ie.assign(n_cells, 0.0);
    grid.nie.assign(n_cells, 0.0);

    // Every cell reruns the same noised seeds with one patch restored from
    // the clean trace, so the patch is the only difference between cells.
    util::parallel_for(n_cells, [&](std::size_t cell) {
        const int comp_idx = static_cast<int>(cell % 3);
        const int layer = static_cast<int>((cell / 3) % static_cast<std::size_t>(n_layers));
        const int position = static_cast<int>(cell / (3 * static_cast<std::size_t>(n_layers)));
        const Component comp = static_cast<Component>(comp_idx);

        PatchEntry patch;
        patch.position = position;
        patch.layer = layer;
        patch.component = comp;
        patch.window_radius = comp == Component::hidden ? 0 : target.window_radius;

        std::vector<double> patched_runs(static_cast<std::size_t>(target.n_noise_runs));
        for (int i = 0; i < target.n_noise_runs; ++i) {
            InterventionSpec spec = noise_spec(target, i);
            spec.patches.push_back(patch);
            const ActivationTrace patched =
                forward_with_intervention(weights, target.token_ids, spec, clean);
            patched_runs[static_cast<std::size_t>(i)] = patched.probability(last, target.traced_token);
        }
        const double p_patched = mean_of(patched_runs);
        grid.ie[cell] = p_patched - grid.p_noised;
        if (!grid.zero_te) {
            grid.nie[cell] = std::clamp(grid.ie[cell] / std::abs(grid.te), -1.0, 1.0);
        }
    });

    return grid;
}

std::string grid_to_csv(const TraceGrid& grid) {
    std::string out = "position,token_text,layer,component,ie,nie,p_clean,p_noised,te\n";
    for (int pos = 0; pos < grid.n_positions; ++pos) {
        const std::string text = pos < static_cast<int>(grid.token_texts.size())
                                     ? grid.token_texts[static_cast<std::size_t>(pos)]
                                     : "";
        for (int layer = 0; layer < grid.n_layers; ++layer) {
            for (int c = 0; c < 3; ++c) {
                const Component comp = static_cast<Component>(c);
                out += util::csv_row({std::to_string(pos), text, std::to_string(layer),
                                      component_name(comp),
                                      util::format_double(grid.ie_at(pos, layer, comp)),
                                      util::format_double(grid.nie_at(pos, layer, comp)),
                                      util::format_double(grid.p_clean),
                                      util::format_double(grid.p_noised),
                                      util::format_double(grid.te)});
            }
        }
    }
    return out;
}

TraceGrid grid_from_csv(const std::string& csv, TokenSpan subject_span, int traced_token) {
    const std::vector<std::string> lines = util::split(csv, '\n');
    if (lines.empty() || lines[0] != "position,token_text,layer,component,ie,nie,p_clean,p_noised,te") {
        throw std::runtime_error("grid_from_csv: unexpected header");
    }

    struct Row {
        int position;
        std::string text;
        int layer;
        Component comp;
        double ie, nie, p_clean, p_noised, te;
    };
    std::vector<Row> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (util::trim(lines[i]).empty()) continue;
        const auto f = util::csv_parse_line(lines[i]);
        if (f.size() != 9) {
            throw std::runtime_error("grid_from_csv: malformed row " + std::to_string(i));
        }
        Row r;
        r.position = std::stoi(f[0]);
        r.text = f[1];
        r.layer = std::stoi(f[2]);
        r.comp = component_from_name(f[3]);
        r.ie = std::stod(f[4]);
        r.nie = std::stod(f[5]);
        r.p_clean = std::stod(f[6]);
        r.p_noised = std::stod(f[7]);
        r.te = std::stod(f[8]);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) {
        throw std::runtime_error("grid_from_csv: no data rows");
    }

    TraceGrid grid;
    grid.subject_span = subject_span;
    grid.traced_token = traced_token;
    grid.n_positions = 0;
    grid.n_layers = 0;
    for (const Row& r : rows) {
        grid.n_positions = std::max(grid.n_positions, r.position + 1);
        grid.n_layers = std::max(grid.n_layers, r.layer + 1);
    }
    const std::size_t n_cells = static_cast<std::size_t>(grid.n_positions) * grid.n_layers * 3;
    if (rows.size() != n_cells) {
        throw std::runtime_error("grid_from_csv: incomplete grid");
    }
    grid.ie.assign(n_cells, 0.0);
    grid.nie.assign(n_cells, 0.0);
    grid.token_texts.assign(static_cast<std::size_t>(grid.n_positions), "");
    grid.p_clean = rows[0].p_clean;
    grid.p_noised = rows[0].p_noised;
    grid.te = rows[0].te;
    grid.te_norm = grid.p_clean > 0.0 ? grid.te / grid.p_clean : 0.0;
    grid.zero_te = std::abs(grid.te) < kZeroTeEpsilon;
    for (const Row& r : rows) {
        const std::size_t idx = grid.cell_index(r.position, r.layer, r.comp);
        grid.ie[idx] = r.ie;
        grid.nie[idx] = r.nie;
        grid.token_texts[static_cast<std::size_t>(r.position)] = r.text;
    }
    return grid;
}

}  // namespace ct
