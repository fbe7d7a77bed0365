#include "ct/relations.hpp"

#include "ct/util.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <stdexcept>

namespace ct {

namespace {

struct RelationData {
    RelationId id;
    const char* name;
    std::vector<const char*> patterns;
    std::vector<const char*> substitutions;
};

const std::vector<RelationData>& relation_data() {
    static const std::vector<RelationData> data = {
        {RelationId::P19,
         "P19",
         {"[X] was born in [Y]", "[X] is originally from [Y]", "[X] was originally from [Y]",
          "[X] originated from [Y]", "[X] originates from [Y]"},
         {"He", "She"}},
        {RelationId::P20,
         "P20",
         {"[X] died in [Y]", "[X] died at [Y]", "[X] passed away in [Y]", "[X] passed away at [Y]",
          "[X] expired at [Y]", "[X] lost their life at [Y]", "[X]'s life ended in [Y]",
          "[X] succumbed at [Y]"},
         {"He", "She"}},
        {RelationId::P27,
         "P27",
         {"[X] is a citizen of [Y]", "[X], a citizen of [Y]", "[X], who is a citizen of [Y]",
          "[X] holds a citizenship of [Y]", "[X] has a citizenship of [Y]",
          "[X], who holds a citizenship of [Y]", "[X], who has a citizenship of [Y]"},
         {"He", "She"}},
        {RelationId::P101,
         "P101",
         {"[X] works in the field of [Y]", "[X] specializes in [Y]", "The expertise of [X] is [Y]",
          "The domain of activity of [X] is [Y]", "The domain of work of [X] is [Y]",
          "[X]'s area of work is [Y]", "[X]'s domain of work is [Y]",
          "[X]'s domain of activity is [Y]", "[X]'s expertise is [Y]",
          "[X] works in the area of [Y]"},
         {"He", "She"}},
        {RelationId::P495,
         "P495",
         {"[X] was created in [Y]", "[X], that was created in [Y]", "[X], created in [Y]",
          "[X], that originated in [Y]", "[X] originated in [Y]", "[X] formed in [Y]",
          "[X] was formed in [Y]", "[X], that was formed in [Y]", "[X] was formulated in [Y]",
          "[X], formulated in [Y]", "[X], that was formulated in [Y]", "[X] was from [Y]",
          "[X], from [Y]", "[X], that was developed in [Y]", "[X] was developed in [Y]",
          "[X], developed in [Y]"},
         {"It"}},
        {RelationId::P740,
         "P740",
         {"[X] was founded in [Y]", "[X], founded in [Y]", "[X] that was founded in [Y]",
          "[X], that was started in [Y]", "[X] started in [Y]", "[X] was started in [Y]",
          "[X], that was created in [Y]", "[X], created in [Y]", "[X] was created in [Y]",
          "[X], that originated in [Y]", "[X] originated in [Y]", "[X] formed in [Y]",
          "[X] was formed in [Y]", "[X], that was formed in [Y]"},
         {"It", "The organisation"}},
        {RelationId::P1376,
         "P1376",
         {"[X] is the capital of [Y]", "[X] is the capital city of [Y]", "[X], the capital of [Y]",
          "[X], the capital city of [Y]", "[X], that is the capital of [Y]",
          "[X], that is the capital city of [Y]"},
         {"It", "The city"}},
    };
    return data;
}

const RelationData& find_relation(RelationId id) {
    for (const RelationData& r : relation_data()) {
        if (r.id == id) return r;
    }
    throw std::invalid_argument("unknown relation id");
}

}  // namespace

std::string relation_name(RelationId id) {
    return find_relation(id).name;
}

std::optional<RelationId> relation_from_name(const std::string& name) {
    for (const RelationData& r : relation_data()) {
        if (name == r.name) return r.id;
    }
    return std::nullopt;
}

const std::vector<RelationId>& all_relations() {
    static const std::vector<RelationId> ids = [] {
        std::vector<RelationId> out;
        for (const RelationData& r : relation_data()) out.push_back(r.id);
        return out;
    }();
    return ids;
}

const std::vector<RelationTemplate>& relation_templates(RelationId id) {
    static std::map<RelationId, std::vector<RelationTemplate>> cache = [] {
        std::map<RelationId, std::vector<RelationTemplate>> out;
        for (const RelationData& r : relation_data()) {
            std::vector<RelationTemplate> ts;
            for (std::size_t i = 0; i < r.patterns.size(); ++i) {
                RelationTemplate t;
                t.template_id = static_cast<int>(i);
                t.pattern = r.patterns[i];
                t.subject_first = t.pattern.rfind("[X]", 0) == 0;
                ts.push_back(std::move(t));
            }
            out[r.id] = std::move(ts);
        }
        return out;
    }();
    return cache.at(id);
}

std::vector<RelationTemplate> subject_first_templates(RelationId id) {
    std::vector<RelationTemplate> out;
    for (const RelationTemplate& t : relation_templates(id)) {
        if (t.subject_first) out.push_back(t);
    }
    return out;
}

const std::vector<std::string>& prompt_bias_substitutions(RelationId id) {
    static std::map<RelationId, std::vector<std::string>> cache = [] {
        std::map<RelationId, std::vector<std::string>> out;
        for (const RelationData& r : relation_data()) {
            out[r.id] = std::vector<std::string>(r.substitutions.begin(), r.substitutions.end());
        }
        return out;
    }();
    return cache.at(id);
}

namespace {

std::string fill_pattern(const std::string& pattern, const std::string& subject) {
    const std::size_t x = pattern.find("[X]");
    if (x == std::string::npos) {
        throw std::invalid_argument("template has no [X] slot: " + pattern);
    }
    std::string out = pattern;
    out.replace(x, 3, subject);
    const std::size_t y = out.find("[Y]");
    if (y == std::string::npos) {
        throw std::invalid_argument("template has no [Y] slot: " + pattern);
    }
    out.erase(y);
    // Truncated before the object: drop the trailing space.
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

}  // namespace

std::string instantiate_prompt(const std::string& pattern, const std::string& subject) {
    return fill_pattern(pattern, subject);
}

std::string instantiate_substituted_prompt(const std::string& pattern, const std::string& substitution) {
    std::string out = fill_pattern(pattern, substitution);
    // "He's life ended in" reads as a contraction; rewrite to the
    // possessive pronoun.
    auto rewrite_possessive = [&](const std::string& from, const std::string& to) {
        if (out.rfind(from + "'s", 0) == 0) {
            out = to + out.substr(from.size() + 2);
        }
    };
    rewrite_possessive("He", "His");
    rewrite_possessive("She", "Her");
    rewrite_possessive("It", "Its");
    if (!out.empty()) {
        out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    }
    return out;
}

std::vector<std::string> all_template_words() {
    std::set<std::string> words;
    for (const RelationData& r : relation_data()) {
        for (const char* pattern : r.patterns) {
            for (const std::string& raw : util::split_words(pattern)) {
                std::string w;
                for (char c : raw) {
                    if (std::isalpha(static_cast<unsigned char>(c))) w += c;
                }
                if (!w.empty() && w != "X" && w != "Y") words.insert(w);
            }
        }
        for (const char* sub : r.substitutions) {
            for (const std::string& w : util::split_words(sub)) words.insert(w);
        }
    }
    return {words.begin(), words.end()};
}

std::string templates_tsv() {
    std::string out = "relation\ttemplate_id\tsubject_first\tpattern\n";
    for (const RelationData& r : relation_data()) {
        for (const RelationTemplate& t : relation_templates(r.id)) {
            out += r.name;
            out += '\t';
            out += std::to_string(t.template_id);
            out += '\t';
            out += t.subject_first ? "1" : "0";
            out += '\t';
            out += t.pattern;
            out += '\n';
        }
    }
    return out;
}

}  // namespace ct
