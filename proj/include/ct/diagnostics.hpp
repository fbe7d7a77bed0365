#pragma once

#include "ct/facts.hpp"
#include "ct/relations.hpp"
#include "ct/tokenizer.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ct {

/// A subject-first fact-completion query built from a relation template.
struct FactQuery {
    RelationId relation = RelationId::P19;
    int template_id = 0;
    std::string subject;
    std::string prompt;  // template with [X] := subject, truncated before [Y]
    CharSpan subject_char_span;

    static FactQuery make(RelationId relation, int template_id, const std::string& subject);
};

struct Prediction {
    std::string token_text;
    int rank = 1;  // 1-based within a top-k list
    double probability = 0.0;
};

/// Read-only next-token scorer. Implemented by the inference engine and,
/// in tests, by scripted fixtures.
class ModelRunner {
public:
    virtual ~ModelRunner() = default;

    /// Top-k next-token predictions for a prompt, rank 1 first.
    virtual std::vector<Prediction> topk(const std::string& prompt, int k) const = 0;

    /// Vocabulary id of the first token of `text`, or -1 when unknown.
    virtual int first_token_id(const std::string& /*text*/) const { return -1; }
};

// ---------------------------------------------------------------------------
// Criterion 1: fact completion (triviality of the prediction)
// ---------------------------------------------------------------------------

/// True iff the prediction is a plausible object of the relation: for P101
/// it must match a known object label; for the named-entity relations it
/// must start with a capital letter and answer at least one reference
/// tuple of the same relation. Excludes fillers such as "the" or "with".
bool is_fact_completion(RelationId relation, const std::string& prediction,
                        const std::set<std::string>& relation_answer_set);

// ---------------------------------------------------------------------------
// Criterion 2: confident prediction (consistency across paraphrases)
// ---------------------------------------------------------------------------

/// Number of templates whose top-k list contains the candidate (exact
/// string match after whitespace trim). Requires at least 5 evaluated
/// templates.
int confidence_count(const std::map<int, std::vector<Prediction>>& per_template_topk,
                     const std::string& candidate);

inline bool is_confident(int count, int threshold = 5) { return count >= threshold; }
inline bool is_guesswork_eligible(int count) { return count == 1; }

// ---------------------------------------------------------------------------
// Criterion 3: usage of heuristics (bias filters + memorization estimate)
// ---------------------------------------------------------------------------

enum class BiasKind { lexical, name, prompt };
const char* bias_kind_name(BiasKind kind);
BiasKind bias_kind_from_name(const std::string& name);

/// Case-sensitive containment in either direction, at word-fragment
/// granularity ("Hell" inside "Olre Hellspirit").
bool lexical_overlap(const std::string& subject, const std::string& prediction);

/// Relations whose subjects are person names and support the name probe.
bool name_bias_applicable(const std::string& relation_code);

struct BiasReport {
    bool lexical = false;
    bool name = false;
    bool prompt = false;
    std::vector<Prediction> evidence;  // probe predictions that matched

    int kinds_set() const { return (lexical ? 1 : 0) + (name ? 1 : 0) + (prompt ? 1 : 0); }
    std::set<BiasKind> tags() const;
};

/// Runs the bias probes against a model. Name probes are per-subject and
/// cached; prompt probes are per-(relation, template). Thread-safe.
class BiasFilters {
public:
    BiasFilters(const ModelRunner& model, int probe_topk = 10);

    /// Prediction recoverable from a "common name in the following
    /// city/country" probe on the subject.
    bool name_bias(const std::string& subject, const std::string& prediction) const;

    /// Top-1 prediction recoverable from the template with a generic
    /// subject substitution.
    bool prompt_bias(const FactQuery& query, const Prediction& top1) const;

    /// All applicable filters for one (query, prediction) pair. The name
    /// probe only runs for person-subject relations.
    BiasReport report(const FactQuery& query, const Prediction& top1) const;

    const std::vector<Prediction>& name_probe_predictions(const std::string& subject) const;

private:
    const ModelRunner& model_;
    int probe_topk_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, std::vector<Prediction>> name_probe_cache_;
};

/// Probe prompt strings (deterministic in subject).
std::vector<std::string> name_probe_prompts(const std::string& subject);

// ---------------------------------------------------------------------------
// Memorization estimate (popularity proxy)
// ---------------------------------------------------------------------------

struct PopularityRecord {
    std::string subject;
    long long views = 0;  // annual page-view rate
};

/// Strictly above the threshold counts as memorized.
bool is_memorized(long long views, long long threshold = 1000);

// ---------------------------------------------------------------------------
// Combined verdicts
// ---------------------------------------------------------------------------

struct HeuristicsVerdict {
    enum class Kind { none, single, multiple };
    Kind kind = Kind::none;
    BiasKind single_kind = BiasKind::lexical;  // meaningful only when single
    bool heuristics_recall_eligible = false;   // single bias and not memorized
};

HeuristicsVerdict heuristics_verdict(bool overlap, bool name_flag, bool prompt_flag, bool memorized);

enum class Scenario { generic, guesswork, heuristics, exact_fact };
const char* scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

/// The decision tree mapping measured criteria to a prediction scenario.
/// Returns nullopt for samples that belong to no split (e.g. confidence
/// counts between 2 and threshold-1).
std::optional<Scenario> classify_scenario(bool fact_completion, int conf_count, bool memorized,
                                          int n_bias_kinds, bool correct, int confidence_threshold = 5);

/// Exact match, or a strict-prefix match when the prediction is longer
/// than 3 characters ("Berl" matches gold "Berlin"; "Ber" does not).
bool matches_gold(const std::string& prediction, const std::string& gold);

}  // namespace ct
