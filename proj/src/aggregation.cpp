#include "ct/aggregation.hpp"

#include "ct/util.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ct {

const char* bin_name(TokenBin bin) {
    switch (bin) {
        case TokenBin::first_subject: return "first_subject";
        case TokenBin::middle_subject: return "middle_subject";
        case TokenBin::last_subject: return "last_subject";
        case TokenBin::first_subsequent: return "first_subsequent";
        case TokenBin::further: return "further";
        case TokenBin::last_token: return "last_token";
    }
    return "?";
}

TokenBin bin_from_name(const std::string& name) {
    for (int i = 0; i < kNumBins; ++i) {
        if (name == bin_name(static_cast<TokenBin>(i))) return static_cast<TokenBin>(i);
    }
    throw std::invalid_argument("unknown token bin: " + name);
}

std::vector<TokenBin> bin_positions(int n_tokens, TokenSpan subject_span) {
    if (subject_span.empty() || subject_span.begin != 0) {
        throw std::invalid_argument("bin_positions: subject span must be a nonempty prefix");
    }
    if (n_tokens < subject_span.size() + 1) {
        throw std::invalid_argument("bin_positions: sequence must extend beyond the subject");
    }
    std::vector<TokenBin> bins(static_cast<std::size_t>(n_tokens));
    for (int i = 0; i < n_tokens; ++i) {
        TokenBin b;
        if (i == n_tokens - 1) {
            b = TokenBin::last_token;  // takes precedence over everything
        } else if (subject_span.contains(i)) {
            if (i == subject_span.end - 1) {
                b = TokenBin::last_subject;  // a 1-token subject is only "last"
            } else if (i == subject_span.begin && subject_span.size() >= 2) {
                b = TokenBin::first_subject;
            } else {
                b = TokenBin::middle_subject;
            }
        } else if (i == subject_span.end) {
            b = TokenBin::first_subsequent;
        } else {
            b = TokenBin::further;
        }
        bins[static_cast<std::size_t>(i)] = b;
    }
    return bins;
}

namespace {

struct CellKey {
    int bin;
    int layer;
    int comp;
    bool operator<(const CellKey& o) const {
        if (bin != o.bin) return bin < o.bin;
        if (layer != o.layer) return layer < o.layer;
        return comp < o.comp;
    }
};

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void normal_ci(const std::vector<double>& v, double mean, double& lo, double& hi) {
    const double sem = sample_std(v, mean) / std::sqrt(static_cast<double>(v.size()));
    lo = mean - 1.96 * sem;
    hi = mean + 1.96 * sem;
}

void bootstrap_ci(const std::vector<double>& v, int resamples, std::uint64_t seed, double& lo,
                  double& hi) {
    const std::size_t n = v.size();
    std::vector<double> means(static_cast<std::size_t>(resamples));
    util::Rng rng(seed);
    for (int b = 0; b < resamples; ++b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += v[static_cast<std::size_t>(util::uniform_below(rng, n))];
        }
        means[static_cast<std::size_t>(b)] = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const std::size_t lo_idx = static_cast<std::size_t>(0.025 * resamples);
    const std::size_t hi_idx =
        std::min(means.size() - 1, static_cast<std::size_t>(0.975 * resamples));
    lo = means[lo_idx];
    hi = means[hi_idx];
}

}  // namespace

AggregateResult aggregate(const std::vector<const TraceGrid*>& grids, const AggregateOptions& options) {
    if (grids.empty()) {
        throw std::invalid_argument("aggregate: empty grid list");
    }
    int n_layers = -1;
    AggregateResult result;

    // Per-sample bin means, then pooled per (bin, layer, component).
    std::map<CellKey, std::vector<double>> pooled;
    for (const TraceGrid* grid : grids) {
        if (!grid) throw std::invalid_argument("aggregate: null grid");
        if (options.normalized && grid->zero_te) {
            ++result.zero_te_skipped;
            continue;
        }
        if (n_layers < 0) {
            n_layers = grid->n_layers;
        } else if (n_layers != grid->n_layers) {
            throw std::invalid_argument("aggregate: grids disagree on layer count");
        }
        const std::vector<TokenBin> bins = bin_positions(grid->n_positions, grid->subject_span);
        for (int layer = 0; layer < grid->n_layers; ++layer) {
            for (int c = 0; c < 3; ++c) {
                const Component comp = static_cast<Component>(c);
                double sums[kNumBins] = {0};
                int counts[kNumBins] = {0};
                for (int pos = 0; pos < grid->n_positions; ++pos) {
                    const int b = static_cast<int>(bins[static_cast<std::size_t>(pos)]);
                    const double v = options.normalized ? grid->nie_at(pos, layer, comp)
                                                        : grid->ie_at(pos, layer, comp);
                    sums[b] += v;
                    ++counts[b];
                }
                for (int b = 0; b < kNumBins; ++b) {
                    if (counts[b] > 0) {
                        pooled[CellKey{b, layer, c}].push_back(sums[b] / counts[b]);
                    }
                }
            }
        }
    }
    if (pooled.empty()) {
        throw std::invalid_argument("aggregate: no usable grids (all zero-TE?)");
    }

    int point_index = 0;
    for (auto& [key, values] : pooled) {
        // Sorting makes the aggregation exactly permutation-invariant in
        // the sample list.
        std::sort(values.begin(), values.end());
        AiePoint p;
        p.bin = static_cast<TokenBin>(key.bin);
        p.layer = key.layer;
        p.component = static_cast<Component>(key.comp);
        p.n = static_cast<int>(values.size());
        p.aie = mean_of(values);
        if (p.n == 1) {
            p.ci_low = p.aie;  // degenerate interval
            p.ci_high = p.aie;
        } else if (options.ci_method == CiMethod::normal) {
            normal_ci(values, p.aie, p.ci_low, p.ci_high);
        } else {
            bootstrap_ci(values, options.bootstrap_resamples,
                         util::derive_seed(options.bootstrap_seed, static_cast<std::uint64_t>(point_index)),
                         p.ci_low, p.ci_high);
            p.ci_low = std::min(p.ci_low, p.aie);
            p.ci_high = std::max(p.ci_high, p.aie);
        }
        result.points.push_back(p);
        ++point_index;
    }

    // Record grid cells nothing contributed to (n = 0).
    for (int b = 0; b < kNumBins; ++b) {
        for (int layer = 0; layer < n_layers; ++layer) {
            for (int c = 0; c < 3; ++c) {
                if (!pooled.contains(CellKey{b, layer, c})) {
                    result.empty_cells.emplace_back(static_cast<TokenBin>(b), layer,
                                                    static_cast<Component>(c));
                }
            }
        }
    }
    return result;
}

std::vector<AiePoint> peak_significance(const std::vector<AiePoint>& points) {
    if (points.size() < 2) {
        throw std::invalid_argument("peak_significance: need at least 2 points");
    }
    std::vector<AiePoint> peaks;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominates = true;
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (i == j) continue;
            if (!(points[i].ci_low > points[j].ci_high)) {
                dominates = false;
                break;
            }
        }
        if (dominates) peaks.push_back(points[i]);
    }
    // Mutual domination is impossible.
    if (peaks.size() > 1) {
        throw std::logic_error("peak_significance: more than one dominating peak");
    }
    return peaks;
}

std::string aie_points_to_csv(const std::vector<AiePoint>& points) {
    std::string out = "bin,layer,component,aie,ci_low,ci_high,n\n";
    for (const AiePoint& p : points) {
        out += util::csv_row({bin_name(p.bin), std::to_string(p.layer), component_name(p.component),
                              util::format_double(p.aie), util::format_double(p.ci_low),
                              util::format_double(p.ci_high), std::to_string(p.n)});
    }
    return out;
}

std::vector<AiePoint> aie_points_from_csv(const std::string& csv) {
    const std::vector<std::string> lines = util::split(csv, '\n');
    if (lines.empty() || lines[0] != "bin,layer,component,aie,ci_low,ci_high,n") {
        throw std::runtime_error("aie_points_from_csv: unexpected header");
    }
    std::vector<AiePoint> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (util::trim(lines[i]).empty()) continue;
        const auto f = util::csv_parse_line(lines[i]);
        if (f.size() != 7) {
            throw std::runtime_error("aie_points_from_csv: malformed row " + std::to_string(i));
        }
        AiePoint p;
        p.bin = bin_from_name(f[0]);
        p.layer = std::stoi(f[1]);
        p.component = component_from_name(f[2]);
        p.aie = std::stod(f[3]);
        p.ci_low = std::stod(f[4]);
        p.ci_high = std::stod(f[5]);
        p.n = std::stoi(f[6]);
        out.push_back(p);
    }
    return out;
}

std::string heatmap_csv(const std::vector<const TraceGrid*>& grids, bool normalized) {
    if (grids.empty()) {
        throw std::invalid_argument("heatmap_csv: empty grid list");
    }
    const int n_pos = grids.front()->n_positions;
    const int n_layers = grids.front()->n_layers;
    for (const TraceGrid* g : grids) {
        if (g->n_positions != n_pos || g->n_layers != n_layers) {
            throw std::invalid_argument("heatmap_csv: grids must share the same shape");
        }
    }
    std::string out = "position,layer,component,value,n\n";
    for (int pos = 0; pos < n_pos; ++pos) {
        for (int layer = 0; layer < n_layers; ++layer) {
            for (int c = 0; c < 3; ++c) {
                const Component comp = static_cast<Component>(c);
                std::vector<double> values;
                for (const TraceGrid* g : grids) {
                    if (normalized && g->zero_te) continue;
                    values.push_back(normalized ? g->nie_at(pos, layer, comp)
                                                : g->ie_at(pos, layer, comp));
                }
                if (values.empty()) continue;
                out += util::csv_row({std::to_string(pos), std::to_string(layer), component_name(comp),
                                      util::format_double(mean_of(values)),
                                      std::to_string(values.size())});
            }
        }
    }
    return out;
}

}  // namespace ct
