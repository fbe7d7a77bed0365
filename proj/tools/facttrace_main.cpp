// facttrace: builds model-specific diagnostic datasets (generic language
// modeling, guesswork, heuristics recall, exact fact recall) and runs
// causal-tracing interventions over them.

#include "ct/commands.hpp"
#include "ct/relations.hpp"
#include "ct/util.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

struct ConfigArgs {
    std::string config_file;
    std::vector<std::string> overrides;  // key=value
    std::string weights;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args, bool weights_required) {
    cmd->add_option("--config", args.config_file, "Run-config file (key = value lines)");
    cmd->add_option("--set", args.overrides, "Config override, e.g. --set seed=7")
        ->type_name("KEY=VALUE");
    auto* w = cmd->add_option("--weights", args.weights, "Weights file (.ctw)");
    if (weights_required) w->required();
}

ct::RunConfig resolve_config(const ConfigArgs& args) {
    ct::RunConfig config;
    if (!args.config_file.empty()) {
        config = ct::RunConfig::from_file(args.config_file);
    }
    for (const std::string& kv : args.overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("--set expects KEY=VALUE, got '" + kv + "'");
        }
        config.set(ct::util::trim(kv.substr(0, eq)), ct::util::trim(kv.substr(eq + 1)));
    }
    if (!args.weights.empty()) {
        config.weights_path = args.weights;
    }
    config.validate();
    return config;
}

std::vector<ct::Scenario> parse_scenarios(const std::vector<std::string>& names) {
    std::vector<ct::Scenario> out;
    for (const std::string& name : names) {
        if (name == "all") {
            return {ct::Scenario::generic, ct::Scenario::guesswork, ct::Scenario::heuristics,
                    ct::Scenario::exact_fact};
        }
        out.push_back(ct::scenario_from_name(name));
    }
    return out;
}

ct::MixtureSpec parse_mixture(const std::string& spec) {
    ct::MixtureSpec mixture;
    if (spec.empty()) return mixture;
    for (const std::string& part : ct::util::split(spec, ',')) {
        const std::size_t eq = part.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("--mixture expects scenario=count[,..], got '" + part + "'");
        }
        mixture.emplace_back(ct::scenario_from_name(ct::util::trim(part.substr(0, eq))),
                             std::stoi(part.substr(eq + 1)));
    }
    return mixture;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diagnostic dataset construction and causal tracing for decoder-only transformers"};
    app.require_subcommand(1);

    // --- build-dataset ---
    ConfigArgs build_config;
    ct::BuildDatasetInputs build_inputs;
    std::string build_out_dir;
    std::vector<std::string> build_scenarios = {"all"};
    std::string build_mixture;
    auto* build = app.add_subcommand("build-dataset", "Build scenario splits from a model and inputs");
    add_config_options(build, build_config, true);
    build->add_option("--facts", build_inputs.facts_path, "Fact-tuple TSV (relation, subject, object)");
    build->add_option("--corpus", build_inputs.corpus_path, "Corpus TSV (title, sentence)");
    build->add_option("--popularity", build_inputs.popularity_path, "Popularity TSV (subject, views)");
    build->add_option("--entities", build_inputs.entity_labels_path, "Entity label list (one per line)");
    build->add_option("--scenario", build_scenarios, "Scenario(s) to build or 'all'");
    build->add_option("--n-generic", build_inputs.n_generic, "Generic samples to collect");
    build->add_option("--n-synthetic", build_inputs.n_synthetic_per_relation,
                      "Synthetic subjects per relation");
    build->add_option("--mixture", build_mixture, "Combined file, e.g. exact_fact=330,heuristics=340");
    build->add_option("--out-dir", build_out_dir, "Output directory")->required();

    // --- trace ---
    ConfigArgs trace_config;
    std::string trace_dataset, trace_out_dir;
    auto* trace = app.add_subcommand("trace", "Causal-tracing grids for every dataset row");
    add_config_options(trace, trace_config, true);
    trace->add_option("--dataset", trace_dataset, "Dataset JSONL")->required();
    trace->add_option("--out-dir", trace_out_dir, "Output directory")->required();

    // --- aggregate ---
    ConfigArgs agg_config;
    std::string agg_trace_dir, agg_out_dir;
    bool agg_heatmap = false;
    auto* agg = app.add_subcommand("aggregate", "Binned AIE with confidence intervals and peaks");
    add_config_options(agg, agg_config, false);
    agg->add_option("--trace-dir", agg_trace_dir, "Directory written by trace")->required();
    agg->add_option("--out-dir", agg_out_dir, "Output directory")->required();
    agg->add_flag("--heatmap", agg_heatmap, "Also write the per-position heatmap CSV");

    // --- audit ---
    ConfigArgs audit_config;
    std::string audit_dataset, audit_out, audit_format = "jsonl", audit_csv_dir;
    auto* audit = app.add_subcommand("audit", "Bias, popularity, total-effect and negation audit");
    add_config_options(audit, audit_config, true);
    audit->add_option("--dataset", audit_dataset, "Dataset file")->required();
    audit->add_option("--format", audit_format, "jsonl | external-json (import adapter)");
    audit->add_option("--csv-dir", audit_csv_dir, "Also write per-flag CSV extracts here");
    audit->add_option("--out", audit_out, "Report file (JSON)")->required();

    // --- import-facts ---
    std::string if_in, if_out;
    auto* import_facts = app.add_subcommand("import-facts", "Validate/normalize a fact-tuple TSV");
    import_facts->add_option("--in", if_in)->required();
    import_facts->add_option("--out", if_out)->required();

    // --- import-corpus ---
    std::string ic_in, ic_out;
    bool ic_split = false;
    auto* import_corpus = app.add_subcommand("import-corpus", "Validate/normalize a corpus TSV");
    import_corpus->add_option("--in", ic_in)->required();
    import_corpus->add_option("--out", ic_out)->required();
    import_corpus->add_flag("--split-sentences", ic_split,
                            "Input lines are title<TAB>paragraph; split into sentences");

    // --- gen-weights ---
    ct::GenWeightsOptions gen_options;
    std::string gen_out, gen_emit_dataset;
    auto* gen = app.add_subcommand("gen-weights", "Emit a seeded toy weights file");
    gen->add_option("--kind", gen_options.kind, "random | planted")->required();
    gen->add_option("--seed", gen_options.seed, "Generator seed");
    gen->add_option("--layers", gen_options.n_layers, "Layers (random)");
    gen->add_option("--d-model", gen_options.d_model, "Model width (random)");
    gen->add_option("--heads", gen_options.n_heads, "Attention heads (random)");
    gen->add_option("--d-mlp", gen_options.d_mlp, "MLP width (random)");
    gen->add_option("--vocab", gen_options.vocab_size, "Vocabulary size (random)");
    gen->add_option("--max-seq", gen_options.max_seq_len, "Context length (random)");
    gen->add_option("--facts", gen_options.n_facts, "Planted facts (planted)");
    gen->add_option("--emit-dataset", gen_emit_dataset, "Also write a trace-ready dataset (planted)");
    gen->add_option("--out", gen_out, "Weights file to write")->required();

    // --- dump-templates ---
    std::string dump_out;
    auto* dump = app.add_subcommand("dump-templates", "Write the embedded relation/template table");
    dump->add_option("--out", dump_out, "TSV file to write")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            const ct::RunConfig config = resolve_config(build_config);
            build_inputs.scenarios = parse_scenarios(build_scenarios);
            build_inputs.mixture = parse_mixture(build_mixture);
            const auto outputs = ct::cmd_build_dataset(config, build_inputs, build_out_dir);
            for (const auto& [scenario, size] : outputs.split_sizes) {
                std::cout << ct::scenario_name(scenario) << ": " << size << " samples\n";
            }
            std::cout << "build log: " << outputs.log_file.string() << "\n";
        } else if (trace->parsed()) {
            const ct::RunConfig config = resolve_config(trace_config);
            const auto outputs = ct::cmd_trace(config, trace_dataset, trace_out_dir);
            std::cout << "rows: " << outputs.n_rows << ", grids: " << outputs.n_grids
                      << ", skipped: " << outputs.n_skipped << ", zero-TE: " << outputs.n_zero_te
                      << ", noise sigma: " << outputs.noise_sigma << "\n"
                      << "manifest: " << outputs.manifest_file.string() << "\n";
        } else if (agg->parsed()) {
            const ct::RunConfig config = resolve_config(agg_config);
            const auto outputs = ct::cmd_aggregate(config, agg_trace_dir, agg_out_dir, agg_heatmap);
            std::cout << "lineplot: " << outputs.lineplot_file.string() << "\n"
                      << "significance: " << outputs.significance_file.string() << "\n";
            if (outputs.selected_peak) {
                std::cout << "significant peak (" << config.component << "): ("
                          << outputs.selected_peak->first << ", layer "
                          << outputs.selected_peak->second << ")\n";
            } else {
                std::cout << "no significant peak for component " << config.component << "\n";
            }
        } else if (audit->parsed()) {
            const ct::RunConfig config = resolve_config(audit_config);
            const auto out = ct::cmd_audit(config, audit_dataset, audit_out, audit_format,
                                           audit_csv_dir.empty() ? std::filesystem::path()
                                                                 : std::filesystem::path(audit_csv_dir));
            std::cout << "audit report: " << out.string() << "\n";
        } else if (import_facts->parsed()) {
            ct::cmd_import_facts(if_in, if_out);
            std::cout << "wrote " << if_out << "\n";
        } else if (import_corpus->parsed()) {
            ct::cmd_import_corpus(ic_in, ic_out, ic_split);
            std::cout << "wrote " << ic_out << "\n";
        } else if (gen->parsed()) {
            gen_options.emit_dataset = gen_emit_dataset;
            ct::cmd_gen_weights(gen_options, gen_out);
            std::cout << "wrote " << gen_out << "\n";
            if (!gen_emit_dataset.empty()) {
                std::cout << "wrote " << gen_emit_dataset << "\n";
            }
        } else if (dump->parsed()) {
            ct::util::atomic_write_file(dump_out, ct::templates_tsv());
            std::cout << "wrote " << dump_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
