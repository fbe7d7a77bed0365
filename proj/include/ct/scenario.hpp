#pragma once

#include "ct/diagnostics.hpp"
#include "ct/facts.hpp"
#include "ct/names.hpp"
#include "ct/popularity.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ct {

/// One dataset row: a (query, prediction) pair with its scenario label and
/// the measurements that justified it.
struct ScenarioSample {
    Scenario scenario = Scenario::generic;
    std::optional<RelationId> relation;  // absent for generic rows
    int template_id = -1;
    std::string prompt;
    std::string subject;
    CharSpan subject_char_span;
    std::string prediction;
    int prediction_rank = 1;
    double prediction_prob = 0.0;
    std::optional<std::string> gold;
    int confidence_count = 0;
    std::optional<long long> popularity;
    std::set<BiasKind> bias_tags;
    std::optional<std::string> style;  // synthetic subjects only
    int traced_token = -1;

    std::string to_json() const;
    static ScenarioSample from_json(const std::string& line);
};

/// (title, sentences) corpus used by the generic split.
struct CorpusEntry {
    std::string page_title;
    std::vector<std::string> sentences;
};

class CorpusStore {
public:
    CorpusStore() = default;
    explicit CorpusStore(std::vector<CorpusEntry> entries);

    /// "title<TAB>sentence" per line; consecutive lines with the same title
    /// are grouped into one entry.
    static CorpusStore from_tsv(const std::string& content);
    std::string to_tsv() const;

    const std::vector<CorpusEntry>& entries() const { return entries_; }

private:
    std::vector<CorpusEntry> entries_;
};

/// Builder thresholds; defaults follow the run-config defaults.
struct BuildParams {
    int topk_confidence = 3;
    int confidence_threshold = 5;
    long long popularity_threshold = 1000;
    int probe_topk = 10;
};

/// Per-stage acceptance/rejection counters for the build log.
using BuildCounters = std::map<std::string, int>;

/// Samples of plain next-token prediction: sentences that start with (part
/// of) their page title, capped at 10 words, whose continuation is not an
/// entity-like token. One sample per corpus entry; throws when the corpus
/// is exhausted before n samples are found.
std::vector<ScenarioSample> build_generic(const CorpusStore& corpus, int n, const ModelRunner& model,
                                          BuildCounters* counters = nullptr);

/// Unconfident but non-trivial predictions over low-popularity subjects:
/// the prediction appears in the top-3 of exactly one template.
std::vector<ScenarioSample> build_guesswork(const FactStore& facts, const ModelRunner& model,
                                            const PopularityLookup& popularity,
                                            const BuildParams& params = {},
                                            BuildCounters* counters = nullptr);

/// Confident predictions on synthetic subjects explained by exactly one
/// bias filter. Confident pairs with no detected bias are excluded from
/// the split and reported through `no_bias_side_channel`.
std::vector<ScenarioSample> build_heuristics(
    const std::map<RelationId, std::vector<SyntheticSubject>>& subjects_by_relation,
    const ModelRunner& model, const BiasFilters& filters, const FactStore& reference,
    const BuildParams& params = {}, BuildCounters* counters = nullptr,
    std::vector<ScenarioSample>* no_bias_side_channel = nullptr);

/// Confident, bias-free, correct predictions for memorized (high
/// popularity) subjects.
std::vector<ScenarioSample> build_exact_fact(const FactStore& facts, const ModelRunner& model,
                                             const PopularityLookup& popularity,
                                             const BiasFilters& filters,
                                             const BuildParams& params = {},
                                             BuildCounters* counters = nullptr);

/// Requested sample counts per scenario for a combined dataset.
using MixtureSpec = std::vector<std::pair<Scenario, int>>;

/// Seeded subsample of each split, concatenated in mixture order, as JSONL
/// with a metadata header line. Throws when a split is smaller than its
/// requested count, naming the split.
std::string assemble_dataset(const std::map<Scenario, std::vector<ScenarioSample>>& splits,
                             const MixtureSpec& mixture, std::uint64_t seed);

/// Dataset JSONL parsing. Returns samples; the optional header JSON line
/// (object with a "format" key) is skipped.
std::vector<ScenarioSample> parse_dataset_jsonl(const std::string& content);

}  // namespace ct
