#include "ct/diagnostics.hpp"

#include "ct/facts.hpp"
#include "ct/relations.hpp"

#include "support/rigged_model.hpp"

#include <doctest.h>

using namespace ct;
using fixtures::RiggedModel;

namespace {

FactStore reference_facts() {
    return FactStore::from_tsv(
        "P27\tThomas Ong\tSingapore\n"
        "P27\tSomeone Else\tUkraine\n"
        "P27\tAnother Person\tCanada\n"
        "P27\tThird Person\tJapan\n"
        "P495\tShibuya-kei\tJapan\n"
        "P740\tSome Band\tRussia\n"
        "P19\tJoseph Clay\tPhiladelphia\n"
        "P19\tSomeone\tOhio\n"
        "P101\tSome Scholar\tphysics\n"
        "P101\tOther Scholar\tanthropology\n");
}

}  // namespace

TEST_CASE("fact completion excludes trivial predictions") {
    const FactStore facts = reference_facts();
    CHECK_FALSE(is_fact_completion(RelationId::P27, "the", facts.answer_set(RelationId::P27)));
    CHECK_FALSE(is_fact_completion(RelationId::P27, "a", facts.answer_set(RelationId::P27)));
    CHECK_FALSE(is_fact_completion(RelationId::P27, "with", facts.answer_set(RelationId::P27)));
    CHECK(is_fact_completion(RelationId::P495, "Japan", facts.answer_set(RelationId::P495)));
    // Capitalized but not an answer of the relation.
    CHECK_FALSE(is_fact_completion(RelationId::P27, "Zzyzx", facts.answer_set(RelationId::P27)));
    // P101 objects are common nouns: answer-set membership decides.
    CHECK(is_fact_completion(RelationId::P101, "physics", facts.answer_set(RelationId::P101)));
    CHECK_FALSE(is_fact_completion(RelationId::P101, "gardening", facts.answer_set(RelationId::P101)));
}

TEST_CASE("confidence counts template membership of the candidate") {
    std::map<int, std::vector<Prediction>> per_template;
    for (int t = 0; t < 7; ++t) {
        std::vector<Prediction> top3;
        top3.push_back(Prediction{t < 5 ? "Singapore" : "Malaysia", 1, 0.5});
        top3.push_back(Prediction{"Japan", 2, 0.2});
        top3.push_back(Prediction{"China", 3, 0.1});
        per_template[t] = std::move(top3);
    }
    CHECK(confidence_count(per_template, "Singapore") == 5);
    CHECK(is_confident(confidence_count(per_template, "Singapore")));
    CHECK(confidence_count(per_template, "Japan") == 7);
    CHECK(confidence_count(per_template, "Malaysia") == 2);
    CHECK_FALSE(is_confident(confidence_count(per_template, "Malaysia")));
    CHECK(confidence_count(per_template, "Nowhere") == 0);

    std::map<int, std::vector<Prediction>> too_few = {{0, {}}, {1, {}}, {2, {}}, {3, {}}};
    CHECK_THROWS_AS(confidence_count(too_few, "x"), std::invalid_argument);
}

TEST_CASE("confidence measured through a model: Table-2-style fixtures") {
    RiggedModel model;
    // Every subject-first P27 template answers Singapore for Thomas Ong.
    for (const RelationTemplate& t : subject_first_templates(RelationId::P27)) {
        model.script(instantiate_prompt(t.pattern, "Thomas Ong"), {"Singapore", "Japan", "the"});
    }
    // Sonar Kollektiv: Russia appears for exactly one P740 template.
    for (const RelationTemplate& t : subject_first_templates(RelationId::P740)) {
        if (t.pattern == "[X] originated in [Y]") {
            model.script(instantiate_prompt(t.pattern, "Sonar Kollektiv"), {"Russia", "the", "a"});
        } else {
            model.script(instantiate_prompt(t.pattern, "Sonar Kollektiv"), {"the", "a", "with"});
        }
    }

    auto measure = [&](RelationId rel, const std::string& subject) {
        std::map<int, std::vector<Prediction>> per_template;
        for (const RelationTemplate& t : subject_first_templates(rel)) {
            per_template[t.template_id] = model.topk(instantiate_prompt(t.pattern, subject), 3);
        }
        return per_template;
    };

    const auto thomas = measure(RelationId::P27, "Thomas Ong");
    CHECK(confidence_count(thomas, "Singapore") == 7);
    CHECK(is_confident(confidence_count(thomas, "Singapore")));

    const auto sonar = measure(RelationId::P740, "Sonar Kollektiv");
    CHECK(confidence_count(sonar, "Russia") == 1);
    CHECK(is_guesswork_eligible(confidence_count(sonar, "Russia")));
}

TEST_CASE("lexical overlap is substring containment either way") {
    CHECK(lexical_overlap("Olre Hellspirit", "Hell"));
    CHECK(lexical_overlap("San Salcos", "Sal"));
    CHECK_FALSE(lexical_overlap("Thomas Ong", "Singapore"));
    CHECK(lexical_overlap("Lim", "Limanaga"));  // prediction contains the subject
    CHECK_FALSE(lexical_overlap("Balo Windhair", "Canada"));
    CHECK_THROWS_AS(lexical_overlap("", "x"), std::invalid_argument);
    CHECK_THROWS_AS(lexical_overlap("x", "  "), std::invalid_argument);
}

TEST_CASE("name bias probes the two common-name prompts") {
    RiggedModel model;
    model.script("Hirashima Hideyoshi is a common name in the following country:",
                 {"China", "Korea", "Japan", "Taiwan"});
    // City probe stays unscripted (filler tokens only).
    const BiasFilters filters(model, 10);
    CHECK(filters.name_bias("Hirashima Hideyoshi", "Japan"));
    CHECK_FALSE(filters.name_bias("Hirashima Hideyoshi", "Germany"));

    // Probe prompts are deterministic in the subject.
    CHECK(name_probe_prompts("X") == name_probe_prompts("X"));
    CHECK(name_probe_prompts("Ann")[0] == "Ann is a common name in the following city:");
    CHECK(name_probe_prompts("Ann")[1] == "Ann is a common name in the following country:");
}

TEST_CASE("name bias boundary sits exactly at the probe top-10") {
    RiggedModel model;
    std::vector<std::string> ranked;
    for (int i = 1; i <= 9; ++i) ranked.push_back("Filler" + std::to_string(i));
    ranked.push_back("Tenth");
    ranked.push_back("Eleventh");
    model.script("Boundary Person is a common name in the following city:", ranked);

    const BiasFilters filters(model, 10);
    CHECK(filters.name_bias("Boundary Person", "Tenth"));
    CHECK_FALSE(filters.name_bias("Boundary Person", "Eleventh"));
}

TEST_CASE("name bias applies only to person-subject relations") {
    CHECK(name_bias_applicable("P19"));
    CHECK(name_bias_applicable("P20"));
    CHECK(name_bias_applicable("P27"));
    CHECK(name_bias_applicable("P103"));
    CHECK(name_bias_applicable("P1412"));
    CHECK_FALSE(name_bias_applicable("P495"));
    CHECK_FALSE(name_bias_applicable("P740"));
    CHECK_FALSE(name_bias_applicable("P1376"));
}

TEST_CASE("prompt bias substitutes generic subjects into the template") {
    RiggedModel model;
    model.script("He has a citizenship of", {"Canada", "the", "a"});
    const BiasFilters filters(model, 10);

    // "[X] has a citizenship of [Y]" is P27 template 4.
    const FactQuery query = FactQuery::make(RelationId::P27, 4, "Balo Windhair");
    CHECK(query.prompt == "Balo Windhair has a citizenship of");

    Prediction top1{"Canada", 1, 0.4};
    CHECK(filters.prompt_bias(query, top1));

    Prediction other{"Sweden", 1, 0.4};
    CHECK_FALSE(filters.prompt_bias(query, other));
}

TEST_CASE("prompt bias probes use the relation's substitution list") {
    RiggedModel model;
    const BiasFilters filters(model, 10);
    // "[X] is the capital of [Y]" is P1376 template 0.
    const FactQuery query = FactQuery::make(RelationId::P1376, 0, "Limanaga");
    Prediction top1{"Nowhere", 1, 0.4};
    filters.prompt_bias(query, top1);

    const auto& prompts = model.queried();
    REQUIRE(prompts.size() == 2);
    CHECK(prompts[0] == "It is the capital of");
    CHECK(prompts[1] == "The city is the capital of");
}

TEST_CASE("substituted prompts get possessive and capitalization fixes") {
    CHECK(instantiate_substituted_prompt("[X]'s life ended in [Y]", "He") == "His life ended in");
    CHECK(instantiate_substituted_prompt("[X]'s expertise is [Y]", "She") == "Her expertise is");
    CHECK(instantiate_substituted_prompt("[X] was created in [Y]", "It") == "It was created in");
    CHECK(instantiate_substituted_prompt("[X], founded in [Y]", "The organisation") ==
          "The organisation, founded in");
}

TEST_CASE("memorization threshold is strict") {
    CHECK(is_memorized(1418));
    CHECK_FALSE(is_memorized(215));
    CHECK_FALSE(is_memorized(1000));
    CHECK(is_memorized(1001));
    CHECK_FALSE(is_memorized(0));
}

TEST_CASE("heuristics verdict counts the set bias kinds") {
    const HeuristicsVerdict single = heuristics_verdict(false, true, false, false);
    CHECK(single.kind == HeuristicsVerdict::Kind::single);
    CHECK(single.single_kind == BiasKind::name);
    CHECK(single.heuristics_recall_eligible);

    const HeuristicsVerdict memorized = heuristics_verdict(false, true, false, true);
    CHECK(memorized.kind == HeuristicsVerdict::Kind::single);
    CHECK_FALSE(memorized.heuristics_recall_eligible);

    const HeuristicsVerdict multi = heuristics_verdict(true, true, false, false);
    CHECK(multi.kind == HeuristicsVerdict::Kind::multiple);
    CHECK_FALSE(multi.heuristics_recall_eligible);

    const HeuristicsVerdict none = heuristics_verdict(false, false, false, false);
    CHECK(none.kind == HeuristicsVerdict::Kind::none);
}

TEST_CASE("gold matching is exact or long-prefix") {
    CHECK(matches_gold("Singapore", "Singapore"));
    CHECK(matches_gold("Bedf", "Bedford"));
    CHECK_FALSE(matches_gold("Bed", "Bedford"));  // 3 characters is too short
    CHECK_FALSE(matches_gold("Ber", "Berlin"));
    CHECK(matches_gold("Berl", "Berlin"));
    CHECK_FALSE(matches_gold("Berlin", "Ber"));   // prefix only checks gold's start
    CHECK_FALSE(matches_gold("", "Berlin"));
}

TEST_CASE("the scenario decision tree classifies the golden rows") {
    const FactStore facts = reference_facts();
    struct Row {
        RelationId relation;
        std::string prediction;
        int conf;
        long long pop;
        int n_bias;
        bool correct;
        std::optional<Scenario> expected;
    };
    const std::vector<Row> rows = {
        // generic: "Nara also enjoyed success in" -> "the"
        {RelationId::P495, "the", 0, 0, 0, false, Scenario::generic},
        // generic: "Benjamin later joined a number of" -> "other"
        {RelationId::P495, "other", 0, 0, 0, false, Scenario::generic},
        // guesswork: Sonar Kollektiv -> Russia, conf 1, pop 215
        {RelationId::P740, "Russia", 1, 215, 0, false, Scenario::guesswork},
        // guesswork: Joseph Clay -> Ohio, conf 1, pop 273
        {RelationId::P19, "Ohio", 1, 273, 0, false, Scenario::guesswork},
        // heuristics: Serok Nuvrome -> Ukraine, conf 6, synthetic, name bias
        {RelationId::P27, "Ukraine", 6, 0, 1, false, Scenario::heuristics},
        // heuristics: Balo Windhair -> Canada, conf 5, prompt bias
        {RelationId::P27, "Canada", 5, 0, 1, false, Scenario::heuristics},
        // exact fact: Thomas Ong -> Singapore, conf 7, pop 1418, no bias
        {RelationId::P27, "Singapore", 7, 1418, 0, true, Scenario::exact_fact},
        // exact fact: Shibuya-kei -> Japan, conf 8, pop 5933, no bias
        {RelationId::P495, "Japan", 8, 5933, 0, true, Scenario::exact_fact},
    };
    for (const Row& row : rows) {
        CAPTURE(row.prediction);
        const bool fact = is_fact_completion(row.relation, row.prediction,
                                             facts.answer_set(row.relation));
        const auto got = classify_scenario(fact, row.conf, is_memorized(row.pop), row.n_bias,
                                           row.correct);
        REQUIRE(got.has_value() == row.expected.has_value());
        if (got) CHECK(*got == *row.expected);
    }
}

TEST_CASE("decision tree leaves gaps unclassified") {
    // Confident but memorized with a bias: neither heuristics nor exact.
    CHECK_FALSE(classify_scenario(true, 7, true, 1, true).has_value());
    // Mid confidence (2..4) fits no split.
    CHECK_FALSE(classify_scenario(true, 3, false, 0, false).has_value());
    // Confident, bias-free, memorized but wrong: not exact fact.
    CHECK_FALSE(classify_scenario(true, 7, true, 0, false).has_value());
    // Unconfident on a memorized subject is not guesswork.
    CHECK_FALSE(classify_scenario(true, 1, true, 0, false).has_value());
}

TEST_CASE("queries must use subject-first templates") {
    CHECK_THROWS_AS(FactQuery::make(RelationId::P101, 2, "Someone"),  // "The expertise of [X] is [Y]"
                    std::invalid_argument);
    const FactQuery q = FactQuery::make(RelationId::P101, 0, "Some Scholar");
    CHECK(q.prompt == "Some Scholar works in the field of");
    CHECK(q.subject_char_span.begin == 0);
    CHECK(q.subject_char_span.end == 12);
}

TEST_CASE("every relation keeps at least five subject-first templates") {
    for (const RelationId rel : all_relations()) {
        CHECK(subject_first_templates(rel).size() >= 5);
    }
}

TEST_CASE("bias report exposes matching probe evidence") {
    RiggedModel model;
    model.script("Serok Nuvrome is a common name in the following country:", {"Ukraine", "Russia"});
    const BiasFilters filters(model, 10);
    // "[X], a citizen of [Y]" is P27 template 1.
    const FactQuery query = FactQuery::make(RelationId::P27, 1, "Serok Nuvrome");
    const BiasReport report = filters.report(query, Prediction{"Ukraine", 1, 0.3});
    CHECK(report.name);
    CHECK_FALSE(report.lexical);
    CHECK_FALSE(report.prompt);
    CHECK(report.kinds_set() == 1);
    REQUIRE_FALSE(report.evidence.empty());
    CHECK(report.evidence[0].token_text == "Ukraine");
    CHECK(report.tags() == std::set<BiasKind>{BiasKind::name});
}

TEST_CASE("confidence is monotone in the template set") {
    util::Rng rng(909);
    const std::vector<std::string> pool = {"Japan", "Canada", "France", "Spain", "Chile", "Kenya"};
    for (int trial = 0; trial < 50; ++trial) {
        std::map<int, std::vector<Prediction>> per_template;
        for (int t = 0; t < 6; ++t) {
            std::vector<Prediction> top3;
            for (int r = 0; r < 3; ++r) {
                top3.push_back(Prediction{pool[util::uniform_below(rng, pool.size())], r + 1, 0.1});
            }
            per_template[t] = std::move(top3);
        }
        const std::string candidate = pool[util::uniform_below(rng, pool.size())];
        const int before = confidence_count(per_template, candidate);

        std::map<int, std::vector<Prediction>> extended = per_template;
        std::vector<Prediction> extra;
        for (int r = 0; r < 3; ++r) {
            extra.push_back(Prediction{pool[util::uniform_below(rng, pool.size())], r + 1, 0.1});
        }
        extended[6] = std::move(extra);
        CHECK(confidence_count(extended, candidate) >= before);
    }
}
