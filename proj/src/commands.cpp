#include "ct/commands.hpp"

#include "ct/aggregation.hpp"
#include "ct/audit.hpp"
#include "ct/entities.hpp"
#include "ct/model_runner.hpp"
#include "ct/names.hpp"
#include "ct/popularity.hpp"
#include "ct/toy_models.hpp"
#include "ct/tracing.hpp"
#include "ct/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace ct {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::unique_ptr<Tokenizer> tokenizer_for(const RunConfig& config, const WeightBundle& weights) {
    if (config.tokenizer == "bytes") {
        return std::make_unique<WhitespaceTokenizer>();
    }
    return make_tokenizer(weights);
}

std::string grid_file_name(std::size_t row) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "grid_%05zu.csv", row);
    return buf;
}

std::string split_jsonl(const std::vector<ScenarioSample>& samples, const char* scenario,
                        std::uint64_t seed) {
    json header{{"format", "ct-dataset-v1"}, {"scenario", scenario}, {"seed", seed}};
    std::string out = header.dump();
    out += '\n';
    for (const ScenarioSample& s : samples) {
        out += s.to_json();
        out += '\n';
    }
    return out;
}

const char* env_or_null(const char* name) {
    return std::getenv(name);
}

}  // namespace

BuildDatasetOutputs cmd_build_dataset(const RunConfig& config, const BuildDatasetInputs& inputs,
                                      const fs::path& out_dir) {
    config.validate();
    if (inputs.scenarios.empty()) {
        throw std::runtime_error("build-dataset: no scenarios selected");
    }
    const WeightBundle weights = load_weights(config.weights_path);
    const EngineRunner runner(weights);
    const BiasFilters filters(runner, config.topk_bias);
    const BuildParams params = config.build_params();

    const bool needs_facts =
        std::any_of(inputs.scenarios.begin(), inputs.scenarios.end(),
                    [](Scenario s) { return s != Scenario::generic; });
    const bool needs_popularity =
        std::any_of(inputs.scenarios.begin(), inputs.scenarios.end(), [](Scenario s) {
            return s == Scenario::guesswork || s == Scenario::exact_fact;
        });
    FactStore facts;
    if (needs_facts) {
        if (inputs.facts_path.empty()) {
            throw std::runtime_error("build-dataset: the selected scenarios need a fact-tuple file");
        }
        facts = FactStore::from_tsv(util::read_text_file(inputs.facts_path));
    }

    std::unique_ptr<PopularityProvider> popularity;
    if (needs_popularity) {
        if (!inputs.popularity_path.empty()) {
            popularity = std::make_unique<MapPopularity>(
                MapPopularity::from_tsv(util::read_text_file(inputs.popularity_path)));
        } else if (const char* url = env_or_null("FACTTRACE_POPULARITY_URL")) {
            const char* cache = env_or_null("FACTTRACE_CACHE_DIR");
            popularity = std::make_unique<HttpPopularity>(url, 2019, 5000,
                                                          cache ? fs::path(cache) : fs::path());
        } else {
            throw std::runtime_error(
                "build-dataset: no popularity source (pass a TSV or set FACTTRACE_POPULARITY_URL)");
        }
    }

    BuildCounters counters;
    BuildDatasetOutputs outputs;
    std::map<Scenario, std::vector<ScenarioSample>> splits;
    std::vector<ScenarioSample> side_channel;
    int popularity_missing = 0;

    for (const Scenario scenario : inputs.scenarios) {
        std::vector<ScenarioSample> samples;
        switch (scenario) {
            case Scenario::generic: {
                if (inputs.corpus_path.empty()) {
                    throw std::runtime_error("build-dataset: the generic scenario needs a corpus file");
                }
                const CorpusStore corpus =
                    CorpusStore::from_tsv(util::read_text_file(inputs.corpus_path));
                samples = build_generic(corpus, inputs.n_generic, runner, &counters);
                break;
            }
            case Scenario::guesswork: {
                const PopularityLookup lookup(*popularity);
                samples = build_guesswork(facts, runner, lookup, params, &counters);
                popularity_missing += lookup.missing_count();
                break;
            }
            case Scenario::heuristics: {
                std::unique_ptr<EntityChecker> entities;
                if (!inputs.entity_labels_path.empty()) {
                    entities = std::make_unique<LabelSetEntityChecker>(LabelSetEntityChecker::from_text(
                        util::read_text_file(inputs.entity_labels_path)));
                } else if (const char* url = env_or_null("FACTTRACE_ENTITY_URL")) {
                    entities = std::make_unique<HttpEntityChecker>(url);
                } else {
                    // Fall back to the labels of the reference tuples.
                    entities = std::make_unique<LabelSetEntityChecker>(facts.all_labels());
                }
                std::map<RelationId, std::vector<SyntheticSubject>> subjects;
                int relation_index = 0;
                for (const RelationId rel : all_relations()) {
                    SyntheticNameGenerator generator(
                        util::derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(relation_index)));
                    subjects[rel] = generator.generate_batch(styles_for_relation(rel),
                                                             inputs.n_synthetic_per_relation, *entities);
                    ++relation_index;
                }
                samples = build_heuristics(subjects, runner, filters, facts, params, &counters,
                                           &side_channel);
                break;
            }
            case Scenario::exact_fact: {
                const PopularityLookup lookup(*popularity);
                samples = build_exact_fact(facts, runner, lookup, filters, params, &counters);
                popularity_missing += lookup.missing_count();
                break;
            }
        }
        const fs::path file = out_dir / (std::string("dataset_") + scenario_name(scenario) + ".jsonl");
        util::atomic_write_file(file, split_jsonl(samples, scenario_name(scenario), config.seed));
        outputs.split_files[scenario] = file;
        outputs.split_sizes[scenario] = static_cast<int>(samples.size());
        splits[scenario] = std::move(samples);
    }

    if (!side_channel.empty()) {
        outputs.side_channel_file = out_dir / "heuristics_no_bias.jsonl";
        util::atomic_write_file(outputs.side_channel_file,
                                split_jsonl(side_channel, "heuristics_no_bias", config.seed));
    }

    if (!inputs.mixture.empty()) {
        outputs.combined_file = out_dir / "dataset_combined.jsonl";
        util::atomic_write_file(outputs.combined_file,
                                assemble_dataset(splits, inputs.mixture, config.seed));
    }

    json log;
    log["format"] = "ct-build-log-v1";
    log["config"] = json::parse(config.echo_json());
    log["counters"] = counters;
    json sizes = json::object();
    for (const auto& [scenario, size] : outputs.split_sizes) {
        sizes[scenario_name(scenario)] = size;
    }
    log["split_sizes"] = sizes;
    log["popularity_missing"] = popularity_missing;
    log["side_channel_size"] = static_cast<int>(side_channel.size());
    outputs.log_file = out_dir / "build_log.json";
    util::atomic_write_file(outputs.log_file, log.dump(2) + "\n");
    return outputs;
}

TraceOutputs cmd_trace(const RunConfig& config, const fs::path& dataset_file,
                       const fs::path& out_dir) {
    config.validate();
    const WeightBundle weights = load_weights(config.weights_path);
    const auto tokenizer = tokenizer_for(config, weights);
    const std::vector<ScenarioSample> rows = parse_dataset_jsonl(util::read_text_file(dataset_file));

    struct RowPlan {
        bool usable = false;
        std::string reason;
        std::vector<int> ids;
        TokenSpan subject;
        std::vector<std::string> texts;
        int traced = -1;
    };
    std::vector<RowPlan> plans(rows.size());
    std::vector<std::vector<int>> subject_tokens;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        RowPlan& plan = plans[i];
        try {
            const SubjectTokenization st =
                tokenize_with_subject(*tokenizer, rows[i].prompt, rows[i].subject_char_span);
            plan.ids = st.tokens.token_ids;
            plan.subject = st.subject_span;
            for (int t = 0; t < st.tokens.size(); ++t) plan.texts.push_back(st.tokens.token_text(t));
            plan.traced = rows[i].traced_token >= 0
                              ? rows[i].traced_token
                              : tokenizer->first_token_id(rows[i].prediction);
            if (plan.traced < 0 || plan.traced >= weights.config.vocab_size) {
                plan.reason = "traced token outside vocabulary";
            } else if (plan.subject.size() >= static_cast<int>(plan.ids.size())) {
                plan.reason = "prompt has no position after the subject";
            } else {
                plan.usable = true;
                subject_tokens.push_back(
                    std::vector<int>(plan.ids.begin(), plan.ids.begin() + plan.subject.end));
            }
        } catch (const std::exception& e) {
            plan.reason = e.what();
        }
    }

    const double sigma = config.noise_sigma > 0.0
                             ? config.noise_sigma
                             : (subject_tokens.empty()
                                    ? 0.0
                                    : calibrate_noise(weights, subject_tokens, config.noise_multiplier));

    TraceOutputs outputs;
    outputs.n_rows = static_cast<int>(rows.size());
    outputs.noise_sigma = sigma;

    json manifest;
    manifest["format"] = "ct-trace-manifest-v1";
    manifest["config"] = json::parse(config.echo_json());
    manifest["noise_sigma"] = sigma;
    json manifest_rows = json::array();

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const RowPlan& plan = plans[i];
        json entry;
        entry["row"] = i;
        if (!plan.usable) {
            entry["skipped"] = true;
            entry["reason"] = plan.reason;
            ++outputs.n_skipped;
            manifest_rows.push_back(std::move(entry));
            continue;
        }
        TraceTarget target;
        target.token_ids = plan.ids;
        target.subject_span = plan.subject;
        target.traced_token = plan.traced;
        target.n_noise_runs = config.n_noise_runs;
        target.noise_sigma = sigma;
        target.base_seed = util::derive_seed(config.seed, i);
        target.window_radius = config.window_radius;
        target.token_texts = plan.texts;

        const TraceGrid grid = trace_grid(weights, target);
        const std::string file = grid_file_name(i);
        util::atomic_write_file(out_dir / file, grid_to_csv(grid));
        ++outputs.n_grids;
        if (grid.zero_te) ++outputs.n_zero_te;

        entry["skipped"] = false;
        entry["grid"] = file;
        entry["subject_token_span"] = {plan.subject.begin, plan.subject.end};
        entry["traced_token"] = plan.traced;
        entry["n_positions"] = grid.n_positions;
        entry["zero_te"] = grid.zero_te;
        entry["p_clean"] = grid.p_clean;
        entry["p_noised"] = grid.p_noised;
        entry["te"] = grid.te;
        manifest_rows.push_back(std::move(entry));
    }
    manifest["rows"] = manifest_rows;
    manifest["n_grids"] = outputs.n_grids;
    manifest["n_skipped"] = outputs.n_skipped;
    manifest["n_zero_te"] = outputs.n_zero_te;

    outputs.manifest_file = out_dir / "manifest.json";
    util::atomic_write_file(outputs.manifest_file, manifest.dump(2) + "\n");
    return outputs;
}

AggregateOutputs cmd_aggregate(const RunConfig& config, const fs::path& trace_dir,
                               const fs::path& out_dir, bool write_heatmap) {
    config.validate();
    const json manifest = json::parse(util::read_text_file(trace_dir / "manifest.json"));
    if (manifest.value("format", "") != "ct-trace-manifest-v1") {
        throw std::runtime_error("aggregate: not a trace manifest: " +
                                 (trace_dir / "manifest.json").string());
    }

    struct GridRef {
        std::string file;
        TokenSpan span;
        int traced;
        double p_clean;
    };
    std::vector<GridRef> refs;
    for (const json& entry : manifest.at("rows")) {
        if (entry.at("skipped").get<bool>()) continue;
        refs.push_back(GridRef{entry.at("grid").get<std::string>(),
                               TokenSpan{entry.at("subject_token_span").at(0).get<int>(),
                                         entry.at("subject_token_span").at(1).get<int>()},
                               entry.at("traced_token").get<int>(),
                               entry.at("p_clean").get<double>()});
    }

    // Optional probability stratification: keep only the n samples with
    // the highest/lowest clean-run probability (ties broken by row order).
    if (config.stratify != "none") {
        const bool top = config.stratify == "top";
        std::stable_sort(refs.begin(), refs.end(), [&](const GridRef& a, const GridRef& b) {
            return top ? a.p_clean > b.p_clean : a.p_clean < b.p_clean;
        });
        if (static_cast<int>(refs.size()) > config.stratify_n) {
            refs.resize(static_cast<std::size_t>(config.stratify_n));
        }
    }

    std::vector<TraceGrid> grids;
    for (const GridRef& ref : refs) {
        const std::string csv = util::read_text_file(trace_dir / ref.file);
        grids.push_back(grid_from_csv(csv, ref.span, ref.traced));
    }
    if (grids.empty()) {
        throw std::runtime_error("aggregate: no grids in " + trace_dir.string());
    }
    std::vector<const TraceGrid*> ptrs;
    for (const TraceGrid& g : grids) ptrs.push_back(&g);

    AggregateOptions options;
    options.normalized = config.normalized;
    options.ci_method = config.ci_method == "bootstrap" ? CiMethod::bootstrap : CiMethod::normal;
    options.bootstrap_seed = config.seed;
    const AggregateResult result = aggregate(ptrs, options);

    AggregateOutputs outputs;
    outputs.lineplot_file = out_dir / "lineplot.csv";
    util::atomic_write_file(outputs.lineplot_file, aie_points_to_csv(result.points));

    // Significance per component; the configured component is highlighted.
    json significance;
    significance["format"] = "ct-significance-v1";
    significance["config"] = json::parse(config.echo_json());
    significance["normalized"] = options.normalized;
    significance["zero_te_skipped"] = result.zero_te_skipped;
    json per_component = json::object();
    for (int c = 0; c < 3; ++c) {
        const Component comp = static_cast<Component>(c);
        std::vector<AiePoint> points;
        for (const AiePoint& p : result.points) {
            if (p.component == comp) points.push_back(p);
        }
        json entry;
        entry["n_points"] = points.size();
        json peaks = json::array();
        if (points.size() >= 2) {
            for (const AiePoint& p : peak_significance(points)) {
                peaks.push_back(json{{"bin", bin_name(p.bin)},
                                     {"layer", p.layer},
                                     {"aie", p.aie},
                                     {"ci_low", p.ci_low},
                                     {"ci_high", p.ci_high},
                                     {"n", p.n}});
                if (comp == component_from_name(config.component)) {
                    outputs.selected_peak = {bin_name(p.bin), p.layer};
                }
            }
        }
        entry["significant_peaks"] = peaks;
        per_component[component_name(comp)] = entry;
    }
    significance["components"] = per_component;
    significance["selected_component"] = config.component;

    outputs.significance_file = out_dir / "significance.json";
    util::atomic_write_file(outputs.significance_file, significance.dump(2) + "\n");

    if (write_heatmap) {
        outputs.heatmap_file = out_dir / "heatmap.csv";
        util::atomic_write_file(outputs.heatmap_file, heatmap_csv(ptrs, options.normalized));
    }
    return outputs;
}

fs::path cmd_audit(const RunConfig& config, const fs::path& dataset_file, const fs::path& out_file,
                   const std::string& format, const fs::path& csv_extract_dir) {
    config.validate();
    const WeightBundle weights = load_weights(config.weights_path);
    const EngineRunner runner(weights);
    const auto tokenizer = tokenizer_for(config, weights);
    std::vector<ScenarioSample> rows;
    if (format == "jsonl") {
        rows = parse_dataset_jsonl(util::read_text_file(dataset_file));
    } else if (format == "external-json") {
        rows = import_external_json(util::read_text_file(dataset_file));
    } else {
        throw std::runtime_error("audit: unknown dataset format '" + format + "'");
    }
    const BiasFilters filters(runner, config.topk_bias);

    AuditReport report;

    const auto bias_rows = audit_bias_rows(rows, filters);
    report.bias_counts = audit_bias(rows, filters, &report.bias_skipped_rows);
    report.popularity_histogram = popularity_histogram(rows, &report.no_popularity_rows);
    report.negation_samples = detect_negation(rows);

    TeAuditOptions te_options;
    te_options.n_noise_runs = config.n_noise_runs;
    te_options.noise_sigma = config.noise_sigma;
    te_options.noise_multiplier = config.noise_multiplier;
    te_options.base_seed = config.seed;
    const TeAuditResult te = audit_total_effect(rows, weights, *tokenizer, te_options);
    report.negative_te_samples = te.negative;
    report.low_te_samples = te.low;
    report.zero_p_clean_samples = te.zero_p_clean;

    // Normalized TE against the binary prompt-bias flag, over rows where
    // both are defined.
    std::vector<double> te_values;
    std::vector<double> prompt_flags;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!bias_rows[i].has_value()) continue;
        if (std::isnan(te.te_norm_by_row[i])) continue;
        te_values.push_back(te.te_norm_by_row[i]);
        prompt_flags.push_back(bias_rows[i]->prompt ? 1.0 : 0.0);
    }
    if (te_values.size() >= 2) {
        report.spearman_te_bias = spearman(te_values, prompt_flags);
    }

    json out = json::parse(report.to_json());
    out["format"] = "ct-audit-v1";
    out["config"] = json::parse(config.echo_json());
    out["n_rows"] = rows.size();
    out["noise_sigma"] = te.noise_sigma;
    util::atomic_write_file(out_file, out.dump(2) + "\n");
    if (!csv_extract_dir.empty()) {
        write_audit_csv_extracts(report, rows, csv_extract_dir);
    }
    return out_file;
}

void cmd_import_facts(const fs::path& input, const fs::path& output) {
    const FactStore facts = FactStore::from_tsv(util::read_text_file(input));
    if (facts.tuples().empty()) {
        throw std::runtime_error("import-facts: no tuples in " + input.string());
    }
    util::atomic_write_file(output, facts.to_tsv());
}

void cmd_import_corpus(const fs::path& input, const fs::path& output, bool split_sentences) {
    if (!split_sentences) {
        const CorpusStore corpus = CorpusStore::from_tsv(util::read_text_file(input));
        if (corpus.entries().empty()) {
            throw std::runtime_error("import-corpus: no entries in " + input.string());
        }
        util::atomic_write_file(output, corpus.to_tsv());
        return;
    }
    // "title<TAB>paragraph" lines: break the paragraph at sentence
    // punctuation.
    std::string out;
    for (const std::string& line : util::split(util::read_text_file(input), '\n')) {
        if (util::trim(line).empty()) continue;
        const auto fields = util::split(line, '\t');
        if (fields.size() != 2) {
            throw std::runtime_error("import-corpus: expected 'title<TAB>paragraph' lines");
        }
        const std::string title = util::trim(fields[0]);
        std::string sentence;
        for (const char c : fields[1]) {
            sentence += c;
            if (c == '.' || c == '!' || c == '?') {
                const std::string trimmed = util::trim(sentence);
                if (!trimmed.empty()) {
                    out += title;
                    out += '\t';
                    out += trimmed;
                    out += '\n';
                }
                sentence.clear();
            }
        }
        const std::string rest = util::trim(sentence);
        if (!rest.empty()) {
            out += title;
            out += '\t';
            out += rest;
            out += '\n';
        }
    }
    const CorpusStore validated = CorpusStore::from_tsv(out);  // validates shape
    util::atomic_write_file(output, validated.to_tsv());
}

void cmd_gen_weights(const GenWeightsOptions& options, const fs::path& out_file) {
    if (options.kind == "random") {
        ModelConfig config;
        config.n_layers = options.n_layers;
        config.d_model = options.d_model;
        config.n_heads = options.n_heads;
        config.d_mlp = options.d_mlp;
        config.vocab_size = options.vocab_size;
        config.max_seq_len = options.max_seq_len;
        save_weights(make_random_bundle(config, options.seed), out_file);
        return;
    }
    if (options.kind != "planted") {
        throw std::runtime_error("gen-weights: unknown kind '" + options.kind + "'");
    }

    const PlantedModel planted = make_planted_bundle(options.n_facts, options.seed);
    save_weights(planted.bundle, out_file);

    if (!options.emit_dataset.empty()) {
        // Trace-ready rows: one prompt per fact from the first P495
        // template, with the measured clean prediction.
        const auto tokenizer = make_tokenizer(planted.bundle);
        std::vector<ScenarioSample> samples;
        for (const PlantedFact& fact : planted.facts) {
            const std::string prompt = instantiate_prompt("[X] was created in [Y]", fact.subject);
            const TokenSequence seq = tokenizer->encode(prompt);
            const ActivationTrace trace = forward_with_capture(planted.bundle, seq.token_ids);
            const int last = seq.size() - 1;
            ScenarioSample s;
            s.scenario = Scenario::exact_fact;
            s.relation = RelationId::P495;
            s.template_id = 0;
            s.prompt = prompt;
            s.subject = fact.subject;
            s.subject_char_span = CharSpan{0, fact.subject.size()};
            s.prediction = fact.object;
            s.prediction_rank = 1;
            s.prediction_prob = trace.probability(last, fact.object_token);
            s.gold = fact.object;
            s.traced_token = fact.object_token;
            samples.push_back(std::move(s));
        }
        util::atomic_write_file(options.emit_dataset,
                                split_jsonl(samples, "exact_fact", options.seed));
    }
}

}  // namespace ct
