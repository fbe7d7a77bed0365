#pragma once

#include "ct/diagnostics.hpp"
#include "ct/scenario.hpp"
#include "ct/tracing.hpp"
#include "ct/weights.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ct {

/// Row-level flag raised by the total-effect audit.
struct TeFlag {
    std::size_t row = 0;
    double p_clean = 0.0;
    double p_noised = 0.0;
    double te = 0.0;
    double te_norm = 0.0;
};

struct AuditReport {
    // Rows flagged by each filter, and by exact combination ("name+prompt").
    std::map<std::string, int> bias_counts;
    int bias_skipped_rows = 0;  // rows missing a subject

    // Popularity histogram over the buckets (0,100], (100,1000],
    // (1000,10000], (10000, inf); rows without a positive record are
    // counted separately.
    std::map<std::string, int> popularity_histogram;
    int no_popularity_rows = 0;

    std::vector<TeFlag> negative_te_samples;       // te < 0
    std::vector<TeFlag> low_te_samples;            // te >= 0, te_norm < 0.4
    std::vector<std::size_t> zero_p_clean_samples; // te_norm undefined
    std::vector<std::size_t> negation_samples;     // standalone "not" in the prompt

    std::optional<double> spearman_te_bias;  // undefined for constant inputs

    std::string to_json() const;
};

/// Applicable bias filters per row; nullopt for rows without a usable
/// subject.
std::vector<std::optional<BiasReport>> audit_bias_rows(const std::vector<ScenarioSample>& rows,
                                                       const BiasFilters& filters);

/// Runs the applicable bias filters over every row and counts flags per
/// kind and per combination. Rows without a subject are skipped (counted).
std::map<std::string, int> audit_bias(const std::vector<ScenarioSample>& rows,
                                      const BiasFilters& filters, int* skipped = nullptr);

/// Flags rows whose traced-token probability is not reduced by noising the
/// subject: te < 0, or te_norm < 0.4 with te >= 0. Noised runs are seeded
/// from the row index.
struct TeAuditOptions {
    int n_noise_runs = 10;
    double noise_sigma = 0.0;  // <= 0 means calibrate over the dataset subjects
    double noise_multiplier = 3.0;
    std::uint64_t base_seed = 0;
};

struct TeAuditResult {
    std::vector<TeFlag> negative;
    std::vector<TeFlag> low;
    std::vector<std::size_t> zero_p_clean;
    std::vector<double> te_norm_by_row;  // NaN where undefined/skipped
    double noise_sigma = 0.0;
};

TeAuditResult audit_total_effect(const std::vector<ScenarioSample>& rows,
                                 const WeightBundle& weights, const Tokenizer& tokenizer,
                                 const TeAuditOptions& options = {});

/// Flag classification of one row's total-effect measurement.
enum class TeVerdict { negative, low, unflagged };
TeVerdict classify_te(double te, double te_norm);

/// Rows whose prompt contains "not" as a standalone word,
/// case-insensitive ("Notting Hill" does not count).
std::vector<std::size_t> detect_negation(const std::vector<ScenarioSample>& rows);
bool contains_negation(const std::string& prompt);

/// Spearman rank correlation with mid-ranks for ties. Returns nullopt when
/// either side is constant; throws when the lengths differ or n < 2.
std::optional<double> spearman(const std::vector<double>& xs, const std::vector<double>& ys);

/// Popularity histogram over the fixed audit buckets.
std::map<std::string, int> popularity_histogram(const std::vector<ScenarioSample>& rows,
                                                int* no_record = nullptr);

/// Import adapter for externally supplied datasets: a JSON array of
/// objects with prompt, subject and attribute (or gold) keys, plus
/// optional prediction, relation_id and popularity. A "{}" placeholder in
/// the prompt is filled with the subject; the subject span is located by
/// exact search (rows whose subject is not a prompt prefix are still
/// bias-scanned but skipped by the total-effect audit).
std::vector<ScenarioSample> import_external_json(const std::string& content);

/// Per-flag CSV extracts of a report (negative_te.csv, low_te.csv,
/// negation.csv) written next to each other in `dir`.
void write_audit_csv_extracts(const AuditReport& report, const std::vector<ScenarioSample>& rows,
                              const std::filesystem::path& dir);

inline constexpr double kLowTeThreshold = 0.4;

}  // namespace ct
