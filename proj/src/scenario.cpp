#include "ct/scenario.hpp"

#include "ct/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace ct {

using nlohmann::json;

std::string ScenarioSample::to_json() const {
    json j;
    j["scenario"] = scenario_name(scenario);
    j["relation_id"] = relation ? json(relation_name(*relation)) : json(nullptr);
    j["template_id"] = template_id >= 0 ? json(template_id) : json(nullptr);
    j["prompt"] = prompt;
    j["subject"] = subject;
    j["subject_char_span"] = {subject_char_span.begin, subject_char_span.end};
    j["prediction"] = prediction;
    j["prediction_rank"] = prediction_rank;
    j["prediction_prob"] = prediction_prob;
    j["gold"] = gold ? json(*gold) : json(nullptr);
    j["confidence_count"] = confidence_count;
    j["popularity"] = popularity ? json(*popularity) : json(nullptr);
    json tags = json::array();
    for (const BiasKind k : bias_tags) tags.push_back(bias_kind_name(k));
    j["bias_tags"] = tags;
    if (style) j["style"] = *style;
    j["traced_token"] = traced_token;
    return j.dump();
}

ScenarioSample ScenarioSample::from_json(const std::string& line) {
    const json j = json::parse(line);
    ScenarioSample s;
    s.scenario = scenario_from_name(j.at("scenario").get<std::string>());
    if (!j.at("relation_id").is_null()) {
        const auto rel = relation_from_name(j.at("relation_id").get<std::string>());
        if (!rel) throw std::runtime_error("dataset row: unknown relation " + j.at("relation_id").dump());
        s.relation = *rel;
    }
    if (!j.at("template_id").is_null()) s.template_id = j.at("template_id").get<int>();
    s.prompt = j.at("prompt").get<std::string>();
    s.subject = j.at("subject").get<std::string>();
    s.subject_char_span.begin = j.at("subject_char_span").at(0).get<std::size_t>();
    s.subject_char_span.end = j.at("subject_char_span").at(1).get<std::size_t>();
    s.prediction = j.at("prediction").get<std::string>();
    s.prediction_rank = j.at("prediction_rank").get<int>();
    s.prediction_prob = j.at("prediction_prob").get<double>();
    if (!j.at("gold").is_null()) s.gold = j.at("gold").get<std::string>();
    s.confidence_count = j.at("confidence_count").get<int>();
    if (!j.at("popularity").is_null()) s.popularity = j.at("popularity").get<long long>();
    for (const auto& tag : j.at("bias_tags")) {
        s.bias_tags.insert(bias_kind_from_name(tag.get<std::string>()));
    }
    if (j.contains("style")) s.style = j.at("style").get<std::string>();
    s.traced_token = j.at("traced_token").get<int>();
    return s;
}

CorpusStore::CorpusStore(std::vector<CorpusEntry> entries) : entries_(std::move(entries)) {}

CorpusStore CorpusStore::from_tsv(const std::string& content) {
    std::vector<CorpusEntry> entries;
    int line_no = 0;
    for (const std::string& line : util::split(content, '\n')) {
        ++line_no;
        const std::string trimmed = util::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto fields = util::split(line, '\t');
        if (fields.size() != 2) {
            throw std::runtime_error("corpus tsv: line " + std::to_string(line_no) +
                                     " does not have 2 tab-separated fields");
        }
        const std::string title = util::trim(fields[0]);
        const std::string sentence = util::trim(fields[1]);
        if (title.empty() || sentence.empty()) {
            throw std::runtime_error("corpus tsv: line " + std::to_string(line_no) +
                                     " has an empty title or sentence");
        }
        if (!entries.empty() && entries.back().page_title == title) {
            entries.back().sentences.push_back(sentence);
        } else {
            entries.push_back(CorpusEntry{title, {sentence}});
        }
    }
    return CorpusStore(std::move(entries));
}

std::string CorpusStore::to_tsv() const {
    std::string out;
    for (const CorpusEntry& e : entries_) {
        for (const std::string& s : e.sentences) {
            out += e.page_title;
            out += '\t';
            out += s;
            out += '\n';
        }
    }
    return out;
}

namespace {

void bump(BuildCounters* counters, const std::string& key) {
    if (counters) ++(*counters)[key];
}

bool starts_with_word(const std::string& sentence, const std::string& word) {
    if (!sentence.starts_with(word)) return false;
    if (sentence.size() == word.size()) return true;
    const unsigned char next = static_cast<unsigned char>(sentence[word.size()]);
    return !(std::isalnum(next) || next == '_');
}

int capitalized_word_count(const std::vector<std::string>& words) {
    int count = 0;
    for (const std::string& w : words) {
        if (!w.empty() && std::isupper(static_cast<unsigned char>(w[0]))) ++count;
    }
    return count;
}

std::string join_words(const std::vector<std::string>& words, std::size_t count) {
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
        if (i > 0) out += ' ';
        out += words[i];
    }
    return out;
}

int traced_token_of(const ModelRunner& model, const std::string& prediction) {
    return model.first_token_id(prediction);
}

// Queries that the model cannot score (e.g. a prompt longer than its
// context) are dropped and counted rather than failing the whole build.
std::vector<Prediction> topk_or_skip(const ModelRunner& model, const std::string& prompt, int k,
                                     BuildCounters* counters, const char* counter_key) {
    try {
        return model.topk(prompt, k);
    } catch (const std::exception&) {
        bump(counters, counter_key);
        return {};
    }
}

// One retained (template, prediction) tuple of a subject, shared by the
// fact-completion builders.
struct TupleCandidate {
    int template_id;
    Prediction prediction;
    BiasKind single_bias;  // heuristics builder only
};

}  // namespace

std::vector<ScenarioSample> build_generic(const CorpusStore& corpus, int n, const ModelRunner& model,
                                          BuildCounters* counters) {
    std::vector<ScenarioSample> out;
    for (const CorpusEntry& entry : corpus.entries()) {
        if (static_cast<int>(out.size()) >= n) break;
        const std::vector<std::string> title_words = util::split_words(entry.page_title);

        for (const std::string& sentence : entry.sentences) {
            // The sentence must start with a part of the page title.
            std::string matched;
            for (const std::string& w : title_words) {
                if (starts_with_word(sentence, w)) {
                    matched = w;
                    break;
                }
            }
            if (matched.empty()) {
                bump(counters, "generic.no_title_prefix");
                continue;
            }

            const std::vector<std::string> words = util::split_words(sentence);
            if (static_cast<int>(words.size()) < 5) {
                bump(counters, "generic.too_short");
                continue;
            }
            if (capitalized_word_count(words) > 3) {
                bump(counters, "generic.too_many_capitals");
                continue;
            }

            // Cap at 10 words; the word after the cap is the natural
            // continuation and must not look like an entity.
            const std::size_t cap = std::min<std::size_t>(10, words.size() - 1);
            const std::string& continuation = words[cap];
            const unsigned char first = static_cast<unsigned char>(continuation[0]);
            if (std::isupper(first) || std::isdigit(first)) {
                bump(counters, "generic.entity_continuation");
                continue;
            }

            ScenarioSample s;
            s.scenario = Scenario::generic;
            s.prompt = join_words(words, cap);
            s.subject = matched;
            s.subject_char_span = CharSpan{0, matched.size()};
            const auto top = model.topk(s.prompt, 1);
            if (top.empty()) {
                bump(counters, "generic.no_prediction");
                continue;
            }
            s.prediction = top[0].token_text;
            s.prediction_rank = 1;
            s.prediction_prob = top[0].probability;
            s.gold = continuation;
            s.traced_token = traced_token_of(model, s.prediction);
            out.push_back(std::move(s));
            bump(counters, "generic.accepted");
            break;  // one sample per entry
        }
    }
    if (static_cast<int>(out.size()) < n) {
        throw std::runtime_error("build_generic: corpus exhausted after " +
                                 std::to_string(out.size()) + " of " + std::to_string(n) +
                                 " samples");
    }
    return out;
}

std::vector<ScenarioSample> build_guesswork(const FactStore& facts, const ModelRunner& model,
                                            const PopularityLookup& popularity,
                                            const BuildParams& params, BuildCounters* counters) {
    std::vector<ScenarioSample> out;
    for (const RelationId relation : all_relations()) {
        const auto& answers = facts.answer_set(relation);
        for (const std::string& subject : facts.subjects(relation)) {
            const long long views = popularity.views_or_zero(subject);
            if (is_memorized(views, params.popularity_threshold)) {
                bump(counters, "guesswork.memorized_subject");
                continue;
            }

            std::vector<TupleCandidate> tuples;
            for (const RelationTemplate& t : subject_first_templates(relation)) {
                const FactQuery query = FactQuery::make(relation, t.template_id, subject);
                for (const Prediction& p : topk_or_skip(model, query.prompt, params.topk_confidence,
                                                        counters, "guesswork.model_error")) {
                    if (!is_fact_completion(relation, p.token_text, answers)) {
                        bump(counters, "guesswork.trivial");
                        continue;
                    }
                    tuples.push_back(TupleCandidate{t.template_id, p, BiasKind::lexical});
                }
            }

            // Retain predictions that appear for exactly one template.
            std::map<std::string, std::vector<const TupleCandidate*>> by_prediction;
            for (const TupleCandidate& c : tuples) {
                by_prediction[util::trim(c.prediction.token_text)].push_back(&c);
            }
            for (const auto& [text, group] : by_prediction) {
                std::set<int> template_ids;
                for (const TupleCandidate* c : group) template_ids.insert(c->template_id);
                if (template_ids.size() != 1) {
                    bump(counters, "guesswork.not_unique");
                    continue;
                }
                const TupleCandidate* c = group.front();
                ScenarioSample s;
                s.scenario = Scenario::guesswork;
                s.relation = relation;
                s.template_id = c->template_id;
                s.prompt = FactQuery::make(relation, c->template_id, subject).prompt;
                s.subject = subject;
                s.subject_char_span = CharSpan{0, subject.size()};
                s.prediction = c->prediction.token_text;
                s.prediction_rank = c->prediction.rank;
                s.prediction_prob = c->prediction.probability;
                s.gold = facts.gold(relation, subject);
                s.confidence_count = 1;
                s.popularity = views;
                s.traced_token = traced_token_of(model, s.prediction);
                out.push_back(std::move(s));
                bump(counters, "guesswork.accepted");
            }
        }
    }
    return out;
}

std::vector<ScenarioSample> build_heuristics(
    const std::map<RelationId, std::vector<SyntheticSubject>>& subjects_by_relation,
    const ModelRunner& model, const BiasFilters& filters, const FactStore& reference,
    const BuildParams& params, BuildCounters* counters,
    std::vector<ScenarioSample>* no_bias_side_channel) {
    std::vector<ScenarioSample> out;
    for (const auto& [relation, subjects] : subjects_by_relation) {
        const auto& answers = reference.answer_set(relation);
        for (const SyntheticSubject& subject : subjects) {
            std::vector<TupleCandidate> biased;
            std::vector<TupleCandidate> unbiased;
            for (const RelationTemplate& t : subject_first_templates(relation)) {
                const FactQuery query = FactQuery::make(relation, t.template_id, subject.name);
                for (const Prediction& p : topk_or_skip(model, query.prompt, params.topk_confidence,
                                                        counters, "heuristics.model_error")) {
                    if (!is_fact_completion(relation, p.token_text, answers)) {
                        bump(counters, "heuristics.trivial");
                        continue;
                    }
                    BiasReport report;
                    try {
                        report = filters.report(query, p);
                    } catch (const std::exception&) {
                        bump(counters, "heuristics.model_error");
                        continue;
                    }
                    const HeuristicsVerdict verdict =
                        heuristics_verdict(report.lexical, report.name, report.prompt,
                                           /*memorized=*/false);
                    switch (verdict.kind) {
                        case HeuristicsVerdict::Kind::single:
                            biased.push_back(TupleCandidate{t.template_id, p, verdict.single_kind});
                            break;
                        case HeuristicsVerdict::Kind::none:
                            bump(counters, "heuristics.no_bias");
                            unbiased.push_back(TupleCandidate{t.template_id, p, BiasKind::lexical});
                            break;
                        case HeuristicsVerdict::Kind::multiple:
                            bump(counters, "heuristics.multiple_bias");
                            break;
                    }
                }
            }

            auto emit_confident = [&](const std::vector<TupleCandidate>& tuples, bool to_output) {
                std::map<std::string, std::vector<const TupleCandidate*>> by_prediction;
                for (const TupleCandidate& c : tuples) {
                    by_prediction[util::trim(c.prediction.token_text)].push_back(&c);
                }
                for (const auto& [text, group] : by_prediction) {
                    std::set<int> template_ids;
                    for (const TupleCandidate* c : group) template_ids.insert(c->template_id);
                    const int count = static_cast<int>(template_ids.size());
                    if (count < params.confidence_threshold) {
                        if (to_output) bump(counters, "heuristics.unconfident");
                        continue;
                    }
                    for (const TupleCandidate* c : group) {
                        ScenarioSample s;
                        s.scenario = Scenario::heuristics;
                        s.relation = relation;
                        s.template_id = c->template_id;
                        s.prompt = FactQuery::make(relation, c->template_id, subject.name).prompt;
                        s.subject = subject.name;
                        s.subject_char_span = CharSpan{0, subject.name.size()};
                        s.prediction = c->prediction.token_text;
                        s.prediction_rank = c->prediction.rank;
                        s.prediction_prob = c->prediction.probability;
                        s.confidence_count = count;
                        s.popularity = 0;  // synthetic: simulated frequency of 0
                        if (to_output) s.bias_tags = {c->single_bias};
                        s.style = name_style_name(subject.style);
                        s.traced_token = traced_token_of(model, s.prediction);
                        if (to_output) {
                            out.push_back(std::move(s));
                            bump(counters, "heuristics.accepted");
                        } else if (no_bias_side_channel) {
                            no_bias_side_channel->push_back(std::move(s));
                        }
                    }
                }
            };
            emit_confident(biased, true);
            // Confident but bias-free synthetic predictions are excluded
            // from the split and surfaced for manual analysis.
            emit_confident(unbiased, false);
        }
    }
    return out;
}

std::vector<ScenarioSample> build_exact_fact(const FactStore& facts, const ModelRunner& model,
                                             const PopularityLookup& popularity,
                                             const BiasFilters& filters, const BuildParams& params,
                                             BuildCounters* counters) {
    std::vector<ScenarioSample> out;
    for (const RelationId relation : all_relations()) {
        for (const std::string& subject : facts.subjects(relation)) {
            const long long views = popularity.views_or_zero(subject);
            if (!is_memorized(views, params.popularity_threshold)) {
                bump(counters, "exact_fact.low_popularity");
                continue;
            }
            const auto gold = facts.gold(relation, subject);
            if (!gold) continue;

            std::vector<TupleCandidate> tuples;
            for (const RelationTemplate& t : subject_first_templates(relation)) {
                const FactQuery query = FactQuery::make(relation, t.template_id, subject);
                for (const Prediction& p : topk_or_skip(model, query.prompt, params.topk_confidence,
                                                        counters, "exact_fact.model_error")) {
                    BiasReport report;
                    try {
                        report = filters.report(query, p);
                    } catch (const std::exception&) {
                        bump(counters, "exact_fact.model_error");
                        continue;
                    }
                    if (report.kinds_set() > 0) {
                        bump(counters, "exact_fact.bias");
                        continue;
                    }
                    if (!matches_gold(p.token_text, *gold)) {
                        bump(counters, "exact_fact.incorrect");
                        continue;
                    }
                    tuples.push_back(TupleCandidate{t.template_id, p, BiasKind::lexical});
                }
            }

            std::map<std::string, std::vector<const TupleCandidate*>> by_prediction;
            for (const TupleCandidate& c : tuples) {
                by_prediction[util::trim(c.prediction.token_text)].push_back(&c);
            }
            for (const auto& [text, group] : by_prediction) {
                std::set<int> template_ids;
                for (const TupleCandidate* c : group) template_ids.insert(c->template_id);
                const int count = static_cast<int>(template_ids.size());
                if (count < params.confidence_threshold) {
                    bump(counters, "exact_fact.unconfident");
                    continue;
                }
                for (const TupleCandidate* c : group) {
                    ScenarioSample s;
                    s.scenario = Scenario::exact_fact;
                    s.relation = relation;
                    s.template_id = c->template_id;
                    s.prompt = FactQuery::make(relation, c->template_id, subject).prompt;
                    s.subject = subject;
                    s.subject_char_span = CharSpan{0, subject.size()};
                    s.prediction = c->prediction.token_text;
                    s.prediction_rank = c->prediction.rank;
                    s.prediction_prob = c->prediction.probability;
                    s.gold = gold;
                    s.confidence_count = count;
                    s.popularity = views;
                    s.traced_token = traced_token_of(model, s.prediction);
                    out.push_back(std::move(s));
                    bump(counters, "exact_fact.accepted");
                }
            }
        }
    }
    return out;
}

std::string assemble_dataset(const std::map<Scenario, std::vector<ScenarioSample>>& splits,
                             const MixtureSpec& mixture, std::uint64_t seed) {
    json counts = json::object();
    for (const auto& [scenario, count] : mixture) {
        counts[scenario_name(scenario)] = count;
    }
    json header{{"format", "ct-dataset-v1"}, {"seed", seed}, {"counts", counts}};
    std::string out = header.dump();
    out += '\n';

    util::Rng rng(seed);
    for (const auto& [scenario, count] : mixture) {
        const auto it = splits.find(scenario);
        const int available = it == splits.end() ? 0 : static_cast<int>(it->second.size());
        if (available < count) {
            throw std::runtime_error(std::string("assemble_dataset: split '") +
                                     scenario_name(scenario) + "' has " + std::to_string(available) +
                                     " samples, " + std::to_string(count) + " requested");
        }
        std::vector<std::size_t> order(static_cast<std::size_t>(available));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        util::shuffle(order, rng);
        for (int i = 0; i < count; ++i) {
            out += it->second[order[static_cast<std::size_t>(i)]].to_json();
            out += '\n';
        }
    }
    return out;
}

std::vector<ScenarioSample> parse_dataset_jsonl(const std::string& content) {
    std::vector<ScenarioSample> out;
    bool first = true;
    for (const std::string& line : util::split(content, '\n')) {
        const std::string trimmed = util::trim(line);
        if (trimmed.empty()) continue;
        if (first) {
            first = false;
            const json j = json::parse(trimmed);
            if (j.is_object() && j.contains("format")) continue;  // header line
        }
        out.push_back(ScenarioSample::from_json(trimmed));
    }
    return out;
}

}  // namespace ct
