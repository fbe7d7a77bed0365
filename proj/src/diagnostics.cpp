#include "ct/diagnostics.hpp"

#include "ct/util.hpp"

#include <cctype>
#include <stdexcept>

namespace ct {

FactQuery FactQuery::make(RelationId relation, int template_id, const std::string& subject) {
    if (util::trim(subject).empty()) {
        throw std::invalid_argument("FactQuery: empty subject");
    }
    const auto& templates = relation_templates(relation);
    if (template_id < 0 || template_id >= static_cast<int>(templates.size())) {
        throw std::invalid_argument("FactQuery: template id out of range for " + relation_name(relation));
    }
    const RelationTemplate& t = templates[static_cast<std::size_t>(template_id)];
    if (!t.subject_first) {
        throw std::invalid_argument("FactQuery: template " + std::to_string(template_id) + " of " +
                                    relation_name(relation) + " is not subject-first");
    }
    FactQuery q;
    q.relation = relation;
    q.template_id = template_id;
    q.subject = subject;
    q.prompt = instantiate_prompt(t.pattern, subject);
    q.subject_char_span = CharSpan{0, subject.size()};
    return q;
}

bool is_fact_completion(RelationId relation, const std::string& prediction,
                        const std::set<std::string>& relation_answer_set) {
    const std::string p = util::trim(prediction);
    if (p.empty()) return false;
    if (relation == RelationId::P101) {
        // Field-of-work objects are common nouns; only a known object label
        // counts.
        return relation_answer_set.contains(p);
    }
    if (!std::isupper(static_cast<unsigned char>(p[0]))) return false;
    return relation_answer_set.contains(p);
}

int confidence_count(const std::map<int, std::vector<Prediction>>& per_template_topk,
                     const std::string& candidate) {
    if (per_template_topk.size() < 5) {
        throw std::invalid_argument("confidence_count: need at least 5 evaluated templates, got " +
                                    std::to_string(per_template_topk.size()));
    }
    const std::string wanted = util::trim(candidate);
    int count = 0;
    for (const auto& [template_id, predictions] : per_template_topk) {
        for (const Prediction& p : predictions) {
            if (util::trim(p.token_text) == wanted) {
                ++count;
                break;
            }
        }
    }
    return count;
}

const char* bias_kind_name(BiasKind kind) {
    switch (kind) {
        case BiasKind::lexical: return "lexical";
        case BiasKind::name: return "name";
        case BiasKind::prompt: return "prompt";
    }
    return "?";
}

BiasKind bias_kind_from_name(const std::string& name) {
    if (name == "lexical") return BiasKind::lexical;
    if (name == "name") return BiasKind::name;
    if (name == "prompt") return BiasKind::prompt;
    throw std::invalid_argument("unknown bias kind: " + name);
}

bool lexical_overlap(const std::string& subject, const std::string& prediction) {
    const std::string s = util::trim(subject);
    const std::string p = util::trim(prediction);
    if (s.empty() || p.empty()) {
        throw std::invalid_argument("lexical_overlap: empty input");
    }
    return s.find(p) != std::string::npos || p.find(s) != std::string::npos;
}

bool name_bias_applicable(const std::string& relation_code) {
    // Person-subject relations; P103 and P1412 occur in external datasets.
    return relation_code == "P19" || relation_code == "P20" || relation_code == "P27" ||
           relation_code == "P103" || relation_code == "P1412";
}

std::set<BiasKind> BiasReport::tags() const {
    std::set<BiasKind> out;
    if (lexical) out.insert(BiasKind::lexical);
    if (name) out.insert(BiasKind::name);
    if (prompt) out.insert(BiasKind::prompt);
    return out;
}

std::vector<std::string> name_probe_prompts(const std::string& subject) {
    return {subject + " is a common name in the following city:",
            subject + " is a common name in the following country:"};
}

BiasFilters::BiasFilters(const ModelRunner& model, int probe_topk)
    : model_(model), probe_topk_(probe_topk) {
    if (probe_topk < 1) {
        throw std::invalid_argument("BiasFilters: probe_topk must be >= 1");
    }
}

const std::vector<Prediction>& BiasFilters::name_probe_predictions(const std::string& subject) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = name_probe_cache_.find(subject);
    if (it == name_probe_cache_.end()) {
        std::vector<Prediction> merged;
        for (const std::string& probe : name_probe_prompts(subject)) {
            for (const Prediction& p : model_.topk(probe, probe_topk_)) {
                merged.push_back(p);
            }
        }
        it = name_probe_cache_.emplace(subject, std::move(merged)).first;
    }
    return it->second;
}

bool BiasFilters::name_bias(const std::string& subject, const std::string& prediction) const {
    const std::string wanted = util::trim(prediction);
    for (const Prediction& p : name_probe_predictions(subject)) {
        if (util::trim(p.token_text) == wanted) return true;
    }
    return false;
}

bool BiasFilters::prompt_bias(const FactQuery& query, const Prediction& top1) const {
    const std::string wanted = util::trim(top1.token_text);
    const RelationTemplate& t =
        relation_templates(query.relation)[static_cast<std::size_t>(query.template_id)];
    for (const std::string& sub : prompt_bias_substitutions(query.relation)) {
        const std::string probe = instantiate_substituted_prompt(t.pattern, sub);
        for (const Prediction& p : model_.topk(probe, probe_topk_)) {
            if (util::trim(p.token_text) == wanted) return true;
        }
    }
    return false;
}

BiasReport BiasFilters::report(const FactQuery& query, const Prediction& top1) const {
    BiasReport out;
    out.lexical = lexical_overlap(query.subject, top1.token_text);
    if (name_bias_applicable(relation_name(query.relation))) {
        out.name = name_bias(query.subject, top1.token_text);
        if (out.name) {
            const std::string wanted = util::trim(top1.token_text);
            for (const Prediction& p : name_probe_predictions(query.subject)) {
                if (util::trim(p.token_text) == wanted) out.evidence.push_back(p);
            }
        }
    }
    out.prompt = prompt_bias(query, top1);
    if ((out.lexical || out.prompt) && out.evidence.empty()) {
        out.evidence.push_back(top1);
    }
    return out;
}

bool is_memorized(long long views, long long threshold) {
    return views > threshold;
}

HeuristicsVerdict heuristics_verdict(bool overlap, bool name_flag, bool prompt_flag, bool memorized) {
    HeuristicsVerdict v;
    const int n = (overlap ? 1 : 0) + (name_flag ? 1 : 0) + (prompt_flag ? 1 : 0);
    if (n == 0) {
        v.kind = HeuristicsVerdict::Kind::none;
    } else if (n == 1) {
        v.kind = HeuristicsVerdict::Kind::single;
        v.single_kind = overlap ? BiasKind::lexical : (name_flag ? BiasKind::name : BiasKind::prompt);
        v.heuristics_recall_eligible = !memorized;
    } else {
        v.kind = HeuristicsVerdict::Kind::multiple;
    }
    return v;
}

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::generic: return "generic";
        case Scenario::guesswork: return "guesswork";
        case Scenario::heuristics: return "heuristics";
        case Scenario::exact_fact: return "exact_fact";
    }
    return "?";
}

Scenario scenario_from_name(const std::string& name) {
    if (name == "generic") return Scenario::generic;
    if (name == "guesswork") return Scenario::guesswork;
    if (name == "heuristics") return Scenario::heuristics;
    if (name == "exact_fact") return Scenario::exact_fact;
    throw std::invalid_argument("unknown scenario: " + name);
}

std::optional<Scenario> classify_scenario(bool fact_completion, int conf_count, bool memorized,
                                          int n_bias_kinds, bool correct, int confidence_threshold) {
    if (!fact_completion) return Scenario::generic;
    if (conf_count == 1 && !memorized) return Scenario::guesswork;
    if (conf_count >= confidence_threshold) {
        if (n_bias_kinds == 1 && !memorized) return Scenario::heuristics;
        if (n_bias_kinds == 0 && memorized && correct) return Scenario::exact_fact;
    }
    return std::nullopt;
}

bool matches_gold(const std::string& prediction, const std::string& gold) {
    const std::string p = util::trim(prediction);
    const std::string g = util::trim(gold);
    if (p.empty() || g.empty()) return false;
    if (p == g) return true;
    return p.size() > 3 && g.starts_with(p);
}

}  // namespace ct
