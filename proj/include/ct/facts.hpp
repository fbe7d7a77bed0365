#pragma once

#include "ct/relations.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ct {

/// One (relation, subject, object) reference tuple.
struct FactTuple {
    RelationId relation;
    std::string subject;
    std::string object;
};

/// In-memory view of a fact-tuple file. Also the source of the per-relation
/// answer sets used by the triviality check (a prediction is non-trivial
/// only if it answers some tuple of the same relation).
class FactStore {
public:
    FactStore() = default;
    explicit FactStore(std::vector<FactTuple> tuples);

    /// Parses "relation<TAB>subject<TAB>object" lines. Lines starting with
    /// '#' and blank lines are skipped; unknown relations are an error.
    static FactStore from_tsv(const std::string& content);
    std::string to_tsv() const;

    const std::vector<FactTuple>& tuples() const { return tuples_; }

    /// Distinct object labels of a relation.
    const std::set<std::string>& answer_set(RelationId relation) const;

    /// Subjects of a relation, in first-appearance order.
    std::vector<std::string> subjects(RelationId relation) const;

    /// Gold object for (relation, subject); the first tuple wins when a
    /// subject appears more than once.
    std::optional<std::string> gold(RelationId relation, const std::string& subject) const;

    /// Every distinct subject and object label (entity collision checks).
    std::set<std::string> all_labels() const;

private:
    std::vector<FactTuple> tuples_;
    std::map<RelationId, std::set<std::string>> answers_;
};

}  // namespace ct
