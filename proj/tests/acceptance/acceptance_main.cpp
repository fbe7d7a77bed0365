// Acceptance suite: one check per release criterion, one PASS/FAIL line
// each, nonzero exit when anything fails. Heavier than the unit tests and
// kept separate so ctest can report the criteria individually.

#include "ct/aggregation.hpp"
#include "ct/audit.hpp"
#include "ct/commands.hpp"
#include "ct/entities.hpp"
#include "ct/model_runner.hpp"
#include "ct/popularity.hpp"
#include "ct/scenario.hpp"
#include "ct/toy_models.hpp"
#include "ct/tracing.hpp"
#include "ct/util.hpp"

#include "../support/rigged_model.hpp"
#include "../support/scalar_oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ct;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;
std::vector<std::string> issues;

void require(bool ok, const std::string& what) {
    if (!ok) {
        issues.push_back(what);
    }
}

void run_criterion(int number, const std::string& title, const std::function<void()>& body) {
    issues.clear();
    const auto start = Clock::now();
    try {
        body();
    } catch (const std::exception& e) {
        issues.push_back(std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (issues.empty()) {
        std::printf("PASS  %d. %s  (%.2fs)\n", number, title.c_str(), seconds);
    } else {
        ++failures;
        std::printf("FAIL  %d. %s  (%.2fs)\n", number, title.c_str(), seconds);
        for (const std::string& issue : issues) {
            std::printf("      - %s\n", issue.c_str());
        }
    }
    std::fflush(stdout);
}

fs::path work_dir() {
    static const fs::path dir = [] {
        const fs::path p = fs::temp_directory_path() / "ct_acceptance";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

ModelConfig toy2_config() {
    ModelConfig c;
    c.n_layers = 2;
    c.d_model = 64;
    c.n_heads = 4;
    c.d_mlp = 256;
    c.vocab_size = 256;
    c.max_seq_len = 64;
    return c;
}

std::vector<int> random_ids(util::Rng& rng, int len, int vocab) {
    std::vector<int> ids(static_cast<std::size_t>(len));
    for (int& id : ids) id = static_cast<int>(util::uniform_below(rng, static_cast<std::uint64_t>(vocab)));
    return ids;
}

// ---------------------------------------------------------------------------
// 1. Patching identity
// ---------------------------------------------------------------------------

void criterion_patching_identity() {
    const auto start = Clock::now();
    const WeightBundle weights = make_random_bundle(toy2_config(), 2024);
    util::Rng rng(91);
    const int n_runs = 10;
    int positive_te_trials = 0;

    for (int trial = 0; trial < 20; ++trial) {
        const int len = 4 + static_cast<int>(util::uniform_below(rng, 9));
        const std::vector<int> ids = random_ids(rng, len, weights.config.vocab_size);
        const ActivationTrace clean = forward_with_capture(weights, ids);
        const int last = len - 1;
        const int traced = clean.argmax(last);
        const double p_clean = clean.probability(last, traced);

        InterventionSpec noise;
        noise.noise_span = TokenSpan{0, std::max(1, len / 2)};
        noise.noise_sigma = 1.5;

        std::vector<double> noised_runs, patched_runs;
        for (int i = 0; i < n_runs; ++i) {
            noise.noise_seed = 5000 + static_cast<std::uint64_t>(trial * n_runs + i);
            noise.patches.clear();
            const ActivationTrace noised = forward_with_intervention(weights, ids, noise, clean);
            noised_runs.push_back(noised.probability(last, traced));

            noise.patches.push_back(
                PatchEntry{last, weights.config.n_layers - 1, Component::hidden, 0});
            const ActivationTrace patched = forward_with_intervention(weights, ids, noise, clean);
            patched_runs.push_back(patched.probability(last, traced));
        }
        const double p_patched = mean_of(patched_runs);
        const double p_noised = mean_of(noised_runs);
        require(std::abs(p_patched - p_clean) <= 1e-9,
                "trial " + std::to_string(trial) + ": patched probability differs from clean by " +
                    util::format_double(std::abs(p_patched - p_clean)));

        // Eq.-2 NIE divides by |TE|, so the full-restoration cell reads
        // exactly 1 whenever noising hurt the prediction (and sign(TE)
        // otherwise). The fixture must mostly destroy its predictions.
        const double te = p_clean - p_noised;
        if (te > 0.0) {
            ++positive_te_trials;
            const double uncapped_nie = (p_patched - p_noised) / std::abs(te);
            require(std::abs(uncapped_nie - 1.0) <= 1e-9,
                    "trial " + std::to_string(trial) + ": uncapped NIE is " +
                        util::format_double(uncapped_nie));
        }
    }
    require(positive_te_trials >= 15,
            "only " + std::to_string(positive_te_trials) + " of 20 trials had positive TE");
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    require(seconds < 5.0, "runtime " + util::format_double(seconds) + "s exceeds 5s");
}

// ---------------------------------------------------------------------------
// 2. Zero-noise identity
// ---------------------------------------------------------------------------

void criterion_zero_noise_identity() {
    const auto start = Clock::now();
    const WeightBundle weights = make_random_bundle(toy2_config(), 2025);
    util::Rng rng(92);
    for (int trial = 0; trial < 100; ++trial) {
        const int len = 2 + static_cast<int>(util::uniform_below(rng, 12));
        const std::vector<int> ids = random_ids(rng, len, weights.config.vocab_size);
        const ActivationTrace clean = forward_with_capture(weights, ids);

        InterventionSpec spec;
        spec.noise_span = TokenSpan{0, std::max(1, len / 2)};
        spec.noise_sigma = 0.0;
        spec.noise_seed = static_cast<std::uint64_t>(trial);
        const ActivationTrace again = forward_with_intervention(weights, ids, spec, clean);

        if (again.final_logits != clean.final_logits) {
            require(false, "trial " + std::to_string(trial) + ": logits differ bitwise");
            break;
        }
        const auto p0 = clean.probabilities(len - 1);
        const auto p1 = again.probabilities(len - 1);
        if (p0 != p1) {
            require(false, "trial " + std::to_string(trial) + ": probabilities differ bitwise");
            break;
        }
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    require(seconds < 5.0, "runtime " + util::format_double(seconds) + "s exceeds 5s");
}

// ---------------------------------------------------------------------------
// 3. Planted-fact localization
// ---------------------------------------------------------------------------

void criterion_planted_localization() {
    const auto start = Clock::now();
    const fs::path dir = work_dir() / "planted";
    fs::create_directories(dir);

    GenWeightsOptions gen;
    gen.kind = "planted";
    gen.n_facts = 50;
    gen.seed = 77;
    gen.emit_dataset = dir / "dataset.jsonl";
    cmd_gen_weights(gen, dir / "weights.ctw");

    // Standalone scalar-math verification of the lookup, independent of
    // the engine.
    const PlantedModel planted = make_planted_bundle(50, 77);
    const auto tokenizer = make_tokenizer(planted.bundle);
    for (const PlantedFact& fact : planted.facts) {
        const TokenSequence seq = tokenizer->encode(fact.subject + " was created in");
        const oracle::Mat probs = oracle::forward_probs(planted.bundle, seq.token_ids);
        const auto& last = probs.back();
        int best = 0;
        for (std::size_t v = 1; v < last.size(); ++v) {
            if (last[v] > last[static_cast<std::size_t>(best)]) best = static_cast<int>(v);
        }
        require(best == fact.object_token,
                "scalar oracle: " + fact.subject + " does not map to " + fact.object);
    }

    RunConfig config;
    config.weights_path = dir / "weights.ctw";
    config.seed = 42;
    config.n_noise_runs = 10;
    config.window_radius = 0;
    config.component = "mlp";

    cmd_trace(config, dir / "dataset.jsonl", dir / "traces");
    const AggregateOutputs agg = cmd_aggregate(config, dir / "traces", dir / "agg");

    require(agg.selected_peak.has_value(), "no significant mlp peak found");
    if (agg.selected_peak) {
        require(agg.selected_peak->first == "last_subject",
                "peak bin is " + agg.selected_peak->first + ", expected last_subject");
        require(agg.selected_peak->second == planted.lookup_layer,
                "peak layer is " + std::to_string(agg.selected_peak->second) + ", expected " +
                    std::to_string(planted.lookup_layer));
    }

    // The CI dominance rule must single out exactly one mlp cell.
    const auto points = aie_points_from_csv(util::read_text_file(agg.lineplot_file));
    std::vector<AiePoint> mlp_points;
    for (const AiePoint& p : points) {
        if (p.component == Component::mlp) mlp_points.push_back(p);
    }
    const auto peaks = peak_significance(mlp_points);
    require(peaks.size() == 1, "expected exactly one significant mlp peak, found " +
                                   std::to_string(peaks.size()));

    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    require(seconds < 60.0, "runtime " + util::format_double(seconds) + "s exceeds 60s");
}

// ---------------------------------------------------------------------------
// 4. Aggregation oracle
// ---------------------------------------------------------------------------

TraceGrid synthetic_grid(util::Rng& rng, int n_positions, int n_layers) {
    TraceGrid g;
    g.n_positions = n_positions;
    g.n_layers = n_layers;
    const int subj = 1 + static_cast<int>(util::uniform_below(rng, static_cast<std::uint64_t>(n_positions - 1)));
    g.subject_span = TokenSpan{0, subj};
    g.p_clean = 0.5 + 0.5 * util::uniform01(rng);
    g.te = 0.1 + 0.5 * util::uniform01(rng);
    g.p_noised = g.p_clean - g.te;
    g.te_norm = g.te / g.p_clean;
    g.zero_te = false;
    const std::size_t cells = static_cast<std::size_t>(n_positions) * n_layers * 3;
    g.ie.resize(cells);
    g.nie.resize(cells);
    for (std::size_t i = 0; i < cells; ++i) {
        g.ie[i] = util::uniform01(rng) - 0.3;
        g.nie[i] = 2.0 * util::uniform01(rng) - 1.0;
    }
    return g;
}

TokenBin brute_force_bin(int pos, int n_tokens, TokenSpan subject) {
    if (pos == n_tokens - 1) return TokenBin::last_token;
    if (pos >= subject.begin && pos < subject.end) {
        if (pos == subject.end - 1) return TokenBin::last_subject;
        if (pos == subject.begin && subject.size() > 1) return TokenBin::first_subject;
        return TokenBin::middle_subject;
    }
    if (pos == subject.end) return TokenBin::first_subsequent;
    return TokenBin::further;
}

void criterion_aggregation_oracle() {
    util::Rng rng(93);

    // Binning: 200 random (length, span) configurations against the
    // brute-force classifier.
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(util::uniform_below(rng, 40));
        const int subj = 1 + static_cast<int>(util::uniform_below(rng, static_cast<std::uint64_t>(n - 1)));
        const auto bins = bin_positions(n, TokenSpan{0, subj});
        for (int pos = 0; pos < n; ++pos) {
            if (bins[static_cast<std::size_t>(pos)] != brute_force_bin(pos, n, TokenSpan{0, subj})) {
                require(false, "binning mismatch at trial " + std::to_string(trial) + " position " +
                                   std::to_string(pos));
                return;
            }
        }
    }

    // AIE and CIs over 1000 synthetic grids against a flat
    // collect-then-average recomputation.
    std::vector<TraceGrid> grids;
    for (int i = 0; i < 1000; ++i) {
        grids.push_back(synthetic_grid(rng, 3 + static_cast<int>(util::uniform_below(rng, 8)), 4));
    }
    std::vector<const TraceGrid*> ptrs;
    for (const TraceGrid& g : grids) ptrs.push_back(&g);

    for (const bool normalized : {true, false}) {
        AggregateOptions options;
        options.normalized = normalized;
        const AggregateResult result = aggregate(ptrs, options);

        std::map<std::tuple<int, int, int>, std::vector<double>> flat;
        for (const TraceGrid& g : grids) {
            for (int layer = 0; layer < g.n_layers; ++layer) {
                for (int c = 0; c < 3; ++c) {
                    std::map<int, std::pair<double, int>> bin_sums;
                    for (int pos = 0; pos < g.n_positions; ++pos) {
                        const TokenBin bin = brute_force_bin(pos, g.n_positions, g.subject_span);
                        const double v = normalized
                                             ? g.nie_at(pos, layer, static_cast<Component>(c))
                                             : g.ie_at(pos, layer, static_cast<Component>(c));
                        bin_sums[static_cast<int>(bin)].first += v;
                        bin_sums[static_cast<int>(bin)].second += 1;
                    }
                    for (const auto& [bin, sum_count] : bin_sums) {
                        flat[{bin, layer, c}].push_back(sum_count.first / sum_count.second);
                    }
                }
            }
        }

        require(result.points.size() == flat.size(),
                "point count mismatch in " + std::string(normalized ? "normalized" : "raw") + " mode");
        for (const AiePoint& p : result.points) {
            const auto key = std::make_tuple(static_cast<int>(p.bin), p.layer,
                                             static_cast<int>(p.component));
            const auto it = flat.find(key);
            if (it == flat.end()) {
                require(false, "unexpected aggregated point");
                continue;
            }
            const std::vector<double>& vals = it->second;
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double ss = 0.0;
            for (double v : vals) ss += (v - mean) * (v - mean);
            const double sem = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) /
                                                     std::sqrt(static_cast<double>(vals.size()))
                                               : 0.0;
            const double lo = vals.size() > 1 ? mean - 1.96 * sem : mean;
            const double hi = vals.size() > 1 ? mean + 1.96 * sem : mean;
            require(std::abs(p.aie - mean) <= 1e-12, "AIE deviates from the flat oracle");
            require(std::abs(p.ci_low - lo) <= 1e-12, "ci_low deviates from the flat oracle");
            require(std::abs(p.ci_high - hi) <= 1e-12, "ci_high deviates from the flat oracle");
            require(p.n == static_cast<int>(vals.size()), "sample count deviates from the oracle");
        }
    }
}

// ---------------------------------------------------------------------------
// 5. Scenario purity and disjointness over a rigged fixture model
// ---------------------------------------------------------------------------

struct RiggedWorld {
    fixtures::RiggedModel model;
    FactStore facts;
    MapPopularity popularity;
    std::map<RelationId, std::vector<SyntheticSubject>> synthetic;
    LabelSetEntityChecker entities;
    CorpusStore corpus;
};

RiggedWorld make_rigged_world() {
    RiggedWorld w;
    w.facts = FactStore::from_tsv(
        "P27\tThomas Ong\tSingapore\n"
        "P27\tHelper One\tCanada\n"
        "P27\tHelper Two\tUkraine\n"
        "P740\tSonar Kollektiv\tBerlin\n"
        "P740\tHelper Three\tRussia\n"
        "P19\tJoseph Clay\tPhiladelphia\n"
        "P19\tHelper Four\tOhio\n"
        "P495\tDon Broco\tBedford\n"
        "P495\tConf Four\tBedford\n"
        "P495\tConf Five\tBedford\n"
        "P495\tEdge Thousand\tBedford\n"
        "P495\tEdge Above\tBedford\n"
        "P495\tShort Prefix\tBedford\n"
        "P740\tGuess Thousand\tBerlin\n"
        "P740\tGuess Above\tBerlin\n");

    w.popularity = MapPopularity({{"Thomas Ong", 1418},
                                  {"Sonar Kollektiv", 215},
                                  {"Joseph Clay", 273},
                                  {"Don Broco", 6984},
                                  {"Conf Four", 5000},
                                  {"Conf Five", 5000},
                                  {"Edge Thousand", 1000},
                                  {"Edge Above", 1001},
                                  {"Short Prefix", 5000},
                                  {"Guess Thousand", 1000},
                                  {"Guess Above", 1001},
                                  {"Helper One", 10},
                                  {"Helper Two", 10},
                                  {"Helper Three", 10},
                                  {"Helper Four", 10}});

    auto script_all = [&](RelationId rel, const std::string& subject,
                          const std::vector<std::string>& ranked) {
        for (const RelationTemplate& t : subject_first_templates(rel)) {
            w.model.script(instantiate_prompt(t.pattern, subject), ranked);
        }
    };
    auto script_first_n = [&](RelationId rel, const std::string& subject, int n,
                              const std::vector<std::string>& ranked) {
        int scripted = 0;
        for (const RelationTemplate& t : subject_first_templates(rel)) {
            if (scripted++ < n) w.model.script(instantiate_prompt(t.pattern, subject), ranked);
        }
    };

    // Exact fact recall: memorized, confident, correct, bias-free.
    script_all(RelationId::P27, "Thomas Ong", {"Singapore", "Japan", "the"});
    // Gold-prefix rule: "Bedf" (4 chars) is correct for gold "Bedford".
    script_all(RelationId::P495, "Don Broco", {"Bedf", "the", "a"});
    // Boundary: confident on exactly 4 vs exactly 5 templates.
    script_first_n(RelationId::P495, "Conf Four", 4, {"Bedf", "the", "a"});
    script_first_n(RelationId::P495, "Conf Five", 5, {"Bedf", "the", "a"});
    // Boundary: popularity exactly 1000 vs 1001 (confident correct otherwise).
    script_all(RelationId::P495, "Edge Thousand", {"Bedf", "the", "a"});
    script_all(RelationId::P495, "Edge Above", {"Bedf", "the", "a"});
    // Boundary: 3-character prefix is not a correct prediction.
    script_all(RelationId::P495, "Short Prefix", {"Bed", "the", "a"});

    // Guesswork: unmemorized subjects answering on exactly one template.
    for (const RelationTemplate& t : subject_first_templates(RelationId::P740)) {
        if (t.pattern == "[X] originated in [Y]") {
            w.model.script(instantiate_prompt(t.pattern, "Sonar Kollektiv"), {"Russia", "the", "a"});
        }
    }
    for (const RelationTemplate& t : subject_first_templates(RelationId::P19)) {
        if (t.pattern == "[X] was originally from [Y]") {
            w.model.script(instantiate_prompt(t.pattern, "Joseph Clay"), {"the", "Ohio", "a"});
        }
    }
    // Boundary: count-1 subjects on either side of the popularity cut.
    for (const std::string& subject : {std::string("Guess Thousand"), std::string("Guess Above")}) {
        for (const RelationTemplate& t : subject_first_templates(RelationId::P740)) {
            if (t.pattern == "[X] was founded in [Y]") {
                w.model.script(instantiate_prompt(t.pattern, subject), {"Berlin", "the", "a"});
            }
        }
    }

    // Heuristics recall: synthetic subjects with exactly one bias each.
    w.synthetic[RelationId::P27] = {
        SyntheticSubject{"Balo Windhair", NameStyle::dnd_human, true},
        SyntheticSubject{"Serok Nuvrome", NameStyle::dnd_human, true},
        SyntheticSubject{"Quiet Worder", NameStyle::german, true},
    };
    script_all(RelationId::P27, "Balo Windhair", {"Canada", "the", "a"});
    for (const RelationTemplate& t : subject_first_templates(RelationId::P27)) {
        // Prompt-bias probes reveal Canada.
        w.model.script(instantiate_substituted_prompt(t.pattern, "He"), {"Canada", "France"});
    }
    script_all(RelationId::P27, "Serok Nuvrome", {"Ukraine", "the", "a"});
    w.model.script("Serok Nuvrome is a common name in the following country:", {"Ukraine", "Russia"});
    // Confident with no detectable bias: excluded, side channel only.
    script_all(RelationId::P27, "Quiet Worder", {"Singapore", "the", "a"});

    w.entities = LabelSetEntityChecker(w.facts.all_labels());

    w.corpus = CorpusStore::from_tsv(
        "Nara\tNara also enjoyed success in the singles circuit that year\n"
        "Benjamin\tBenjamin later joined a number of other clubs before retiring\n"
        "Solomon\tSolomon also defended the network choice of games to air\n");
    return w;
}

void criterion_scenario_purity() {
    RiggedWorld w = make_rigged_world();
    const PopularityLookup lookup(w.popularity);
    const BiasFilters filters(w.model, 10);
    const BuildParams params;

    const auto generic = build_generic(w.corpus, 3, w.model, nullptr);
    const auto guesswork = build_guesswork(w.facts, w.model, lookup, params, nullptr);
    const auto exact = build_exact_fact(w.facts, w.model, lookup, filters, params, nullptr);
    std::vector<ScenarioSample> side_channel;
    const auto heuristics =
        build_heuristics(w.synthetic, w.model, filters, w.facts, params, nullptr, &side_channel);

    require(!generic.empty(), "generic split is empty");
    require(!guesswork.empty(), "guesswork split is empty");
    require(!exact.empty(), "exact-fact split is empty");
    require(!heuristics.empty(), "heuristics split is empty");

    // --- independent re-validation via the diagnostics module ---

    auto per_template_topk = [&](RelationId rel, const std::string& subject) {
        std::map<int, std::vector<Prediction>> out;
        for (const RelationTemplate& t : subject_first_templates(rel)) {
            out[t.template_id] = w.model.topk(instantiate_prompt(t.pattern, subject), 3);
        }
        return out;
    };

    for (const ScenarioSample& s : generic) {
        require(!s.relation.has_value(), "generic row carries a relation");
        require(util::split_words(s.prompt).size() <= 10, "generic prompt longer than 10 words");
        const auto top = w.model.topk(s.prompt, 1);
        require(!top.empty() && top[0].token_text == s.prediction,
                "generic traced prediction is not the model top-1");
        require(s.gold.has_value() &&
                    !std::isupper(static_cast<unsigned char>((*s.gold)[0])) &&
                    !std::isdigit(static_cast<unsigned char>((*s.gold)[0])),
                "generic continuation looks entity-like");
    }

    for (const ScenarioSample& s : guesswork) {
        // Guesswork count law: recomputing the confidence from stored
        // per-template top-3 yields exactly 1.
        const int count = confidence_count(per_template_topk(*s.relation, s.subject), s.prediction);
        require(count == 1, "guesswork row has recomputed confidence " + std::to_string(count));
        require(s.confidence_count == 1, "guesswork row stores confidence != 1");
        require(!is_memorized(*s.popularity, params.popularity_threshold),
                "guesswork subject is memorized");
        require(is_fact_completion(*s.relation, s.prediction, w.facts.answer_set(*s.relation)),
                "guesswork prediction is trivial");
        const auto label = classify_scenario(true, count, is_memorized(*s.popularity), 0, false);
        require(label == Scenario::guesswork, "decision tree disagrees with the guesswork label");
    }

    for (const ScenarioSample& s : exact) {
        require(s.bias_tags.empty(), "exact-fact row carries bias tags");
        require(s.popularity && *s.popularity > 1000, "exact-fact subject not memorized");
        require(s.gold && matches_gold(s.prediction, *s.gold), "exact-fact prediction incorrect");
        const int count = confidence_count(per_template_topk(*s.relation, s.subject), s.prediction);
        require(count >= params.confidence_threshold, "exact-fact row is not confident");
        FactQuery query = FactQuery::make(*s.relation, s.template_id, s.subject);
        const BiasReport report =
            filters.report(query, Prediction{s.prediction, s.prediction_rank, s.prediction_prob});
        require(report.kinds_set() == 0, "exact-fact row triggers a bias filter");
        const auto label = classify_scenario(true, count, true, report.kinds_set(), true);
        require(label == Scenario::exact_fact, "decision tree disagrees with the exact-fact label");
    }

    std::set<std::string> heuristics_subjects;
    for (const ScenarioSample& s : heuristics) {
        heuristics_subjects.insert(s.subject);
        require(s.bias_tags.size() == 1, "heuristics row must have exactly one bias tag");
        require(!w.entities.exists(s.subject), "heuristics subject collides with an entity");
        require(s.popularity == 0, "heuristics subject popularity is not 0");
        require(s.confidence_count >= params.confidence_threshold, "heuristics row not confident");
        FactQuery query = FactQuery::make(*s.relation, s.template_id, s.subject);
        const BiasReport report =
            filters.report(query, Prediction{s.prediction, s.prediction_rank, s.prediction_prob});
        const HeuristicsVerdict verdict =
            heuristics_verdict(report.lexical, report.name, report.prompt, false);
        require(verdict.kind == HeuristicsVerdict::Kind::single,
                "heuristics row does not re-validate as single-bias");
        require(verdict.heuristics_recall_eligible, "heuristics row not recall-eligible");
        require(s.bias_tags.contains(verdict.single_kind), "stored bias tag disagrees with filters");
        const auto label =
            classify_scenario(true, s.confidence_count, false, report.kinds_set(), false);
        require(label == Scenario::heuristics, "decision tree disagrees with the heuristics label");
    }
    require(!heuristics_subjects.contains("Quiet Worder"),
            "confident-no-bias subject leaked into the heuristics split");
    bool side_channel_has_quiet = false;
    for (const ScenarioSample& s : side_channel) {
        if (s.subject == "Quiet Worder") side_channel_has_quiet = true;
    }
    require(side_channel_has_quiet, "confident-no-bias subject missing from the side channel");

    // --- threshold boundaries ---
    std::set<std::string> exact_subjects;
    for (const ScenarioSample& s : exact) exact_subjects.insert(s.subject);
    require(exact_subjects.contains("Conf Five"), "confidence 5 should be included");
    require(!exact_subjects.contains("Conf Four"), "confidence 4 must be excluded");
    require(exact_subjects.contains("Edge Above"), "popularity 1001 should be included");
    require(!exact_subjects.contains("Edge Thousand"), "popularity 1000 must be excluded");
    require(exact_subjects.contains("Don Broco"), "4-char gold prefix should be included");
    require(!exact_subjects.contains("Short Prefix"), "3-char gold prefix must be excluded");
    std::set<std::string> guesswork_subjects;
    for (const ScenarioSample& s : guesswork) guesswork_subjects.insert(s.subject);
    require(guesswork_subjects.contains("Guess Thousand"),
            "popularity 1000 stays guesswork-eligible");
    require(!guesswork_subjects.contains("Guess Above"), "popularity 1001 is not guesswork");

    // --- disjointness over (subject, template, prediction) triples ---
    std::set<std::string> triples;
    for (const auto* split : {&generic, &guesswork, &heuristics, &exact}) {
        for (const ScenarioSample& s : *split) {
            const std::string key =
                s.subject + "|" + std::to_string(s.template_id) + "|" + s.prediction;
            if (!triples.insert(key).second) {
                require(false, "triple appears in two splits: " + key);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 6. Table-2 golden rows
// ---------------------------------------------------------------------------

void criterion_golden_rows() {
    const FactStore facts = FactStore::from_tsv(
        "P740\tHelper\tRussia\n"
        "P19\tHelper\tOhio\n"
        "P27\tHelper A\tUkraine\n"
        "P27\tHelper B\tCanada\n"
        "P27\tThomas Ong\tSingapore\n"
        "P495\tShibuya-kei\tJapan\n");

    struct GoldenRow {
        const char* subject;
        const char* prediction;
        RelationId relation;
        int conf;
        long long pop;
        int n_bias;
        bool correct;
        Scenario expected;
    };
    const std::vector<GoldenRow> rows = {
        {"Nara", "the", RelationId::P495, 0, 0, 0, false, Scenario::generic},
        {"Benjamin", "other", RelationId::P495, 0, 0, 0, false, Scenario::generic},
        {"Sonar Kollektiv", "Russia", RelationId::P740, 1, 215, 0, false, Scenario::guesswork},
        {"Joseph Clay", "Ohio", RelationId::P19, 1, 273, 0, false, Scenario::guesswork},
        {"Serok Nuvrome", "Ukraine", RelationId::P27, 6, 0, 1, false, Scenario::heuristics},
        {"Balo Windhair", "Canada", RelationId::P27, 5, 0, 1, false, Scenario::heuristics},
        {"Thomas Ong", "Singapore", RelationId::P27, 7, 1418, 0, true, Scenario::exact_fact},
        {"Shibuya-kei", "Japan", RelationId::P495, 8, 5933, 0, true, Scenario::exact_fact},
    };
    for (const GoldenRow& row : rows) {
        const bool fact = is_fact_completion(row.relation, row.prediction,
                                             facts.answer_set(row.relation));
        const auto got =
            classify_scenario(fact, row.conf, is_memorized(row.pop), row.n_bias, row.correct);
        if (!got || *got != row.expected) {
            require(false, std::string(row.subject) + " -> " + row.prediction + " classified as " +
                               (got ? scenario_name(*got) : "none") + ", expected " +
                               scenario_name(row.expected));
        }
    }
}

// ---------------------------------------------------------------------------
// 7. Audit formulas against brute-force oracles
// ---------------------------------------------------------------------------

void criterion_audit_formulas() {
    const PlantedModel planted = make_planted_bundle(10, 404);
    const WeightBundle& weights = planted.bundle;
    const auto tokenizer = make_tokenizer(weights);

    // 50 rows: each fact traced on its object (strong positive TE) and on
    // four junk byte tokens (near-zero or negative TE).
    std::vector<ScenarioSample> rows;
    for (const PlantedFact& fact : planted.facts) {
        ScenarioSample base;
        base.scenario = Scenario::exact_fact;
        base.relation = RelationId::P495;
        base.template_id = 0;
        base.prompt = fact.subject + " was created in";
        base.subject = fact.subject;
        base.subject_char_span = CharSpan{0, fact.subject.size()};
        base.prediction = fact.object;
        base.traced_token = fact.object_token;
        rows.push_back(base);
        for (int junk = 0; junk < 4; ++junk) {
            ScenarioSample s = base;
            s.prediction = "?";
            s.traced_token = 40 + junk;  // byte tokens
            rows.push_back(s);
        }
    }
    require(rows.size() == 50, "fixture must have 50 rows");

    TeAuditOptions options;
    options.n_noise_runs = 10;
    options.base_seed = 31;
    const TeAuditResult audit = audit_total_effect(rows, weights, *tokenizer, options);

    // Brute-force oracle: recompute every row's quantities from first
    // principles (direct engine runs, plain averaging) and re-derive the
    // flags from the documented rules.
    std::vector<std::vector<int>> subject_tokens;
    for (const PlantedFact& fact : planted.facts) {
        for (int i = 0; i < 5; ++i) subject_tokens.push_back({fact.subject_token});
    }
    const double sigma = calibrate_noise(weights, subject_tokens, 3.0);
    require(std::abs(sigma - audit.noise_sigma) <= 1e-12, "audit noise sigma deviates");

    std::set<std::size_t> expect_negative, expect_low;
    std::vector<double> expect_te_norm(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const TokenSequence seq = tokenizer->encode(rows[i].prompt);
        const ActivationTrace clean = forward_with_capture(weights, seq.token_ids);
        const int last = seq.size() - 1;
        const double p_clean = clean.probability(last, rows[i].traced_token);

        std::vector<double> noised;
        for (int run = 0; run < options.n_noise_runs; ++run) {
            InterventionSpec spec;
            spec.noise_span = TokenSpan{0, 1};
            spec.noise_sigma = sigma;
            spec.noise_seed = util::derive_seed(options.base_seed, i) + static_cast<std::uint64_t>(run);
            const ActivationTrace t = forward_with_intervention(weights, seq.token_ids, spec, clean);
            noised.push_back(t.probability(last, rows[i].traced_token));
        }
        const bool all_equal = std::all_of(noised.begin(), noised.end(),
                                           [&](double v) { return v == noised.front(); });
        double p_noised = 0.0;
        if (all_equal) {
            p_noised = noised.front();
        } else {
            for (double v : noised) p_noised += v;
            p_noised /= static_cast<double>(noised.size());
        }
        const double te = p_clean - p_noised;
        const double te_norm = te / p_clean;
        expect_te_norm[i] = te_norm;
        if (te < 0.0) {
            expect_negative.insert(i);
        } else if (te_norm < 0.4) {
            expect_low.insert(i);
        }
    }

    std::set<std::size_t> got_negative, got_low;
    for (const TeFlag& f : audit.negative) {
        got_negative.insert(f.row);
        require(f.te < 0.0, "negative flag with nonnegative te");
    }
    for (const TeFlag& f : audit.low) {
        got_low.insert(f.row);
        require(f.te >= 0.0 && f.te_norm < 0.4, "low flag outside its definition");
    }
    require(got_negative == expect_negative, "negative-TE flag set deviates from the oracle");
    require(got_low == expect_low, "low-TE flag set deviates from the oracle");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(std::abs(audit.te_norm_by_row[i] - expect_te_norm[i]) <= 1e-12,
                "te_norm deviates at row " + std::to_string(i));
    }
    require(!expect_negative.empty(), "fixture should produce at least one negative-TE row");
    require(got_negative.size() + got_low.size() <= rows.size(), "flag sets overlap");

    // Spearman against a count-based rank + Pearson oracle on a 50-row
    // random fixture.
    util::Rng rng(95);
    std::vector<double> xs(50), ys(50);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = util::uniform01(rng);
        ys[i] = (i % 3 == 0) ? 1.0 : 0.0;  // binary with ties
    }
    const auto got = spearman(xs, ys);
    require(got.has_value(), "spearman undefined on non-constant input");
    if (got) {
        auto count_ranks = [](const std::vector<double>& v) {
            std::vector<double> ranks(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) {
                int less = 0, equal = 0;
                for (std::size_t j = 0; j < v.size(); ++j) {
                    if (v[j] < v[i]) ++less;
                    if (v[j] == v[i]) ++equal;
                }
                ranks[i] = less + (equal + 1.0) / 2.0;
            }
            return ranks;
        };
        const auto rx = count_ranks(xs);
        const auto ry = count_ranks(ys);
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < rx.size(); ++i) {
            mx += rx[i];
            my += ry[i];
        }
        mx /= static_cast<double>(rx.size());
        my /= static_cast<double>(ry.size());
        double cov = 0, vx = 0, vy = 0;
        for (std::size_t i = 0; i < rx.size(); ++i) {
            cov += (rx[i] - mx) * (ry[i] - my);
            vx += (rx[i] - mx) * (rx[i] - mx);
            vy += (ry[i] - my) * (ry[i] - my);
        }
        require(std::abs(*got - cov / std::sqrt(vx * vy)) <= 1e-12,
                "spearman deviates from the rank-then-Pearson oracle");
    }

    // Negation detector on the documented example and the substring trap.
    require(contains_negation("The language used by Louis Bonaparte is not the language of the"),
            "negated query not flagged");
    require(!contains_negation("Notting Hill is located in"), "substring false positive");
}

// ---------------------------------------------------------------------------
// 8. End-to-end determinism
// ---------------------------------------------------------------------------

void criterion_determinism() {
    const fs::path dir = work_dir() / "determinism";
    fs::create_directories(dir);

    GenWeightsOptions gen;
    gen.kind = "planted";
    gen.n_facts = 12;
    gen.seed = 99;
    cmd_gen_weights(gen, dir / "weights.ctw");
    const PlantedModel planted = make_planted_bundle(12, 99);

    std::string facts_tsv, pop_tsv, corpus_tsv, entities_txt;
    for (const PlantedFact& f : planted.facts) {
        facts_tsv += "P495\t" + f.subject + "\t" + f.object + "\n";
        pop_tsv += f.subject + "\t5000\n";
        entities_txt += f.subject + "\n" + f.object + "\n";
    }
    // Corpus sentences over the planted vocabulary so prompts stay inside
    // the toy context window.
    for (const PlantedFact& f : planted.facts) {
        corpus_tsv += f.subject + "\t" + f.subject +
                      " was created in the area of work in the domain of activity\n";
    }
    util::atomic_write_file(dir / "facts.tsv", facts_tsv);
    util::atomic_write_file(dir / "pop.tsv", pop_tsv);
    util::atomic_write_file(dir / "corpus.tsv", corpus_tsv);
    util::atomic_write_file(dir / "entities.txt", entities_txt);

    RunConfig config;
    config.weights_path = dir / "weights.ctw";
    config.seed = 5;
    config.n_noise_runs = 10;
    config.window_radius = 0;
    config.component = "mlp";

    BuildDatasetInputs inputs;
    inputs.facts_path = dir / "facts.tsv";
    inputs.corpus_path = dir / "corpus.tsv";
    inputs.popularity_path = dir / "pop.tsv";
    inputs.entity_labels_path = dir / "entities.txt";
    inputs.scenarios = {Scenario::generic, Scenario::guesswork, Scenario::heuristics,
                        Scenario::exact_fact};
    inputs.n_generic = 12;
    inputs.n_synthetic_per_relation = 2;
    inputs.mixture = {{Scenario::exact_fact, 12}};

    auto run_pipeline = [&](const fs::path& out_root) {
        fs::create_directories(out_root);
        const BuildDatasetOutputs build = cmd_build_dataset(config, inputs, out_root / "dataset");
        cmd_trace(config, build.combined_file, out_root / "traces");
        // No heatmap: the mixture mixes template lengths.
        cmd_aggregate(config, out_root / "traces", out_root / "agg", false);
        cmd_audit(config, build.combined_file, out_root / "audit.json");
    };

    run_pipeline(dir / "run_a");
    run_pipeline(dir / "run_b");

    // Byte-compare every produced file.
    std::vector<fs::path> files_a;
    for (const auto& entry : fs::recursive_directory_iterator(dir / "run_a")) {
        if (entry.is_regular_file()) files_a.push_back(fs::relative(entry.path(), dir / "run_a"));
    }
    std::sort(files_a.begin(), files_a.end());
    require(!files_a.empty(), "pipeline produced no files");
    for (const fs::path& rel : files_a) {
        const fs::path b = dir / "run_b" / rel;
        if (!fs::exists(b)) {
            require(false, "missing in second run: " + rel.string());
            continue;
        }
        if (util::read_text_file(dir / "run_a" / rel) != util::read_text_file(b)) {
            require(false, "outputs differ: " + rel.string());
        }
    }
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    run_criterion(1, "patching identity restores P(o) to P_clean (<= 1e-9), uncapped NIE = 1",
                  criterion_patching_identity);
    run_criterion(2, "zero-noise identity is bit-for-bit over 100 prompts",
                  criterion_zero_noise_identity);
    run_criterion(3, "planted-fact localization peaks at (last_subject, layer 1, mlp)",
                  criterion_planted_localization);
    run_criterion(4, "aggregation and binning match brute-force oracles (1e-12 / exact)",
                  criterion_aggregation_oracle);
    run_criterion(5, "scenario purity, disjointness and threshold boundaries",
                  criterion_scenario_purity);
    run_criterion(6, "golden example rows classify into their scenarios",
                  criterion_golden_rows);
    run_criterion(7, "audit TE/TE_norm flags and spearman match brute-force oracles (1e-12)",
                  criterion_audit_formulas);
    run_criterion(8, "end-to-end pipeline is byte-identical across reruns",
                  criterion_determinism);

    if (failures == 0) {
        std::printf("all acceptance criteria passed\n");
    } else {
        std::printf("%d criteria failed\n", failures);
    }
    return failures == 0 ? 0 : 1;
}
