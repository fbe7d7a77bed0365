#pragma once

#include "ct/run_config.hpp"
#include "ct/scenario.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ct {

// Library backing of the CLI subcommands. Every command is reproducible
// from (config, input files, seed); outputs are written atomically.

struct BuildDatasetInputs {
    std::filesystem::path facts_path;         // fact-tuple TSV
    std::filesystem::path corpus_path;        // corpus TSV (generic split)
    std::filesystem::path popularity_path;    // popularity TSV; empty -> env endpoint
    std::filesystem::path entity_labels_path; // entity labels; empty -> env endpoint or fact labels
    std::vector<Scenario> scenarios;
    int n_generic = 1000;
    int n_synthetic_per_relation = 30;
    MixtureSpec mixture;  // empty: no combined file
};

struct BuildDatasetOutputs {
    std::map<Scenario, std::filesystem::path> split_files;
    std::map<Scenario, int> split_sizes;
    std::filesystem::path log_file;
    std::filesystem::path combined_file;     // when a mixture was requested
    std::filesystem::path side_channel_file; // confident-no-bias synthetic samples
};

BuildDatasetOutputs cmd_build_dataset(const RunConfig& config, const BuildDatasetInputs& inputs,
                                      const std::filesystem::path& out_dir);

struct TraceOutputs {
    std::filesystem::path manifest_file;
    int n_rows = 0;
    int n_grids = 0;
    int n_skipped = 0;
    int n_zero_te = 0;
    double noise_sigma = 0.0;
};

TraceOutputs cmd_trace(const RunConfig& config, const std::filesystem::path& dataset_file,
                       const std::filesystem::path& out_dir);

struct AggregateOutputs {
    std::filesystem::path lineplot_file;
    std::filesystem::path significance_file;
    std::filesystem::path heatmap_file;  // only when requested
    // Significant peak of the configured component, if any:
    // (bin name, layer).
    std::optional<std::pair<std::string, int>> selected_peak;
};

AggregateOutputs cmd_aggregate(const RunConfig& config, const std::filesystem::path& trace_dir,
                               const std::filesystem::path& out_dir, bool write_heatmap = false);

/// format: "jsonl" (native datasets) or "external-json" (the import
/// adapter for externally supplied rows). When csv_extract_dir is set,
/// per-flag CSV extracts are written there as well.
std::filesystem::path cmd_audit(const RunConfig& config, const std::filesystem::path& dataset_file,
                                const std::filesystem::path& out_file,
                                const std::string& format = "jsonl",
                                const std::filesystem::path& csv_extract_dir = {});

/// Validates and normalizes a fact-tuple TSV.
void cmd_import_facts(const std::filesystem::path& input, const std::filesystem::path& output);

/// Validates a corpus TSV; with split_sentences, input lines are
/// "title<TAB>paragraph" and paragraphs are split at sentence punctuation.
void cmd_import_corpus(const std::filesystem::path& input, const std::filesystem::path& output,
                       bool split_sentences = false);

struct GenWeightsOptions {
    std::string kind = "random";  // random | planted
    std::uint64_t seed = 1;
    // random:
    int n_layers = 2;
    int d_model = 64;
    int n_heads = 4;
    int d_mlp = 256;
    int vocab_size = 256;
    int max_seq_len = 64;
    // planted:
    int n_facts = 50;
    std::filesystem::path emit_dataset;  // optional trace-ready dataset
};

void cmd_gen_weights(const GenWeightsOptions& options, const std::filesystem::path& out_file);

}  // namespace ct
