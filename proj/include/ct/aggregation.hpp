#pragma once

#include "ct/model.hpp"
#include "ct/tracing.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ct {

/// The six token categories positions are binned into.
enum class TokenBin {
    first_subject,
    middle_subject,
    last_subject,
    first_subsequent,
    further,
    last_token,
};

const char* bin_name(TokenBin bin);
TokenBin bin_from_name(const std::string& name);
inline constexpr int kNumBins = 6;

/// Total, exhaustive position -> bin mapping. The last position is always
/// last_token; a one-token subject maps only to last_subject; a two-token
/// subject has an empty middle. Requires n_tokens >= subject length + 1
/// and a nonempty subject span starting at 0.
std::vector<TokenBin> bin_positions(int n_tokens, TokenSpan subject_span);

/// One aggregated (bin, layer, component) cell.
struct AiePoint {
    TokenBin bin = TokenBin::last_token;
    int layer = 0;
    Component component = Component::hidden;
    double aie = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int n = 0;  // contributing samples, >= 1
};

enum class CiMethod { normal, bootstrap };

struct AggregateOptions {
    bool normalized = true;         // aggregate NIE; false aggregates raw IE
    CiMethod ci_method = CiMethod::normal;
    int bootstrap_resamples = 1000;
    std::uint64_t bootstrap_seed = 0;
};

struct AggregateResult {
    std::vector<AiePoint> points;  // n >= 1 cells only
    // (bin, layer, component) cells no sample contributed to.
    std::vector<std::tuple<TokenBin, int, Component>> empty_cells;
    int zero_te_skipped = 0;  // grids dropped in normalized mode
};

/// Bins every grid's positions, averages multiple positions of one bin
/// within a sample first, then averages across samples per
/// (bin, layer, component) with a 95% confidence interval.
AggregateResult aggregate(const std::vector<const TraceGrid*>& grids,
                          const AggregateOptions& options);

/// A point is a significant peak iff its lower confidence bound exceeds
/// the upper confidence bound of every other point. At most one point can
/// satisfy this; requires at least two points.
std::vector<AiePoint> peak_significance(const std::vector<AiePoint>& points);

/// Lineplot export: (bin, layer, component, aie, ci_low, ci_high, n).
std::string aie_points_to_csv(const std::vector<AiePoint>& points);
std::vector<AiePoint> aie_points_from_csv(const std::string& csv);

/// Heatmap export: per-position values without binning, averaged across
/// grids. All grids must have the same position count.
std::string heatmap_csv(const std::vector<const TraceGrid*>& grids, bool normalized);

}  // namespace ct
