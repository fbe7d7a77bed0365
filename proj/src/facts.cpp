#include "ct/facts.hpp"

#include "ct/util.hpp"

#include <stdexcept>

namespace ct {

FactStore::FactStore(std::vector<FactTuple> tuples) : tuples_(std::move(tuples)) {
    for (const FactTuple& t : tuples_) {
        answers_[t.relation].insert(t.object);
    }
}

FactStore FactStore::from_tsv(const std::string& content) {
    std::vector<FactTuple> tuples;
    int line_no = 0;
    for (const std::string& line : util::split(content, '\n')) {
        ++line_no;
        const std::string trimmed = util::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const std::vector<std::string> fields = util::split(line, '\t');
        if (fields.size() != 3) {
            throw std::runtime_error("fact tuples: line " + std::to_string(line_no) +
                                     " does not have 3 tab-separated fields");
        }
        const auto relation = relation_from_name(util::trim(fields[0]));
        if (!relation) {
            throw std::runtime_error("fact tuples: line " + std::to_string(line_no) +
                                     " has unsupported relation " + fields[0]);
        }
        FactTuple t;
        t.relation = *relation;
        t.subject = util::trim(fields[1]);
        t.object = util::trim(fields[2]);
        if (t.subject.empty() || t.object.empty()) {
            throw std::runtime_error("fact tuples: line " + std::to_string(line_no) +
                                     " has an empty subject or object");
        }
        tuples.push_back(std::move(t));
    }
    return FactStore(std::move(tuples));
}

std::string FactStore::to_tsv() const {
    std::string out;
    for (const FactTuple& t : tuples_) {
        out += relation_name(t.relation);
        out += '\t';
        out += t.subject;
        out += '\t';
        out += t.object;
        out += '\n';
    }
    return out;
}

const std::set<std::string>& FactStore::answer_set(RelationId relation) const {
    static const std::set<std::string> empty;
    const auto it = answers_.find(relation);
    return it == answers_.end() ? empty : it->second;
}

std::vector<std::string> FactStore::subjects(RelationId relation) const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const FactTuple& t : tuples_) {
        if (t.relation == relation && seen.insert(t.subject).second) {
            out.push_back(t.subject);
        }
    }
    return out;
}

std::optional<std::string> FactStore::gold(RelationId relation, const std::string& subject) const {
    for (const FactTuple& t : tuples_) {
        if (t.relation == relation && t.subject == subject) return t.object;
    }
    return std::nullopt;
}

std::set<std::string> FactStore::all_labels() const {
    std::set<std::string> out;
    for (const FactTuple& t : tuples_) {
        out.insert(t.subject);
        out.insert(t.object);
    }
    return out;
}

}  // namespace ct
