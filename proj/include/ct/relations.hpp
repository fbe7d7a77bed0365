#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ct {

/// The seven supported relation codes.
enum class RelationId { P19, P20, P27, P101, P495, P740, P1376 };

std::string relation_name(RelationId id);
std::optional<RelationId> relation_from_name(const std::string& name);
const std::vector<RelationId>& all_relations();

struct RelationTemplate {
    int template_id = 0;       // index within the relation
    std::string pattern;       // full pattern with [X] and [Y]
    bool subject_first = false;
};

/// All query templates of a relation, in data-file order.
const std::vector<RelationTemplate>& relation_templates(RelationId id);

/// Only the subject-first templates. Queries and probes are built from
/// these; every relation keeps at least five.
std::vector<RelationTemplate> subject_first_templates(RelationId id);

/// Generic subject substitutions used to probe for prompt bias.
const std::vector<std::string>& prompt_bias_substitutions(RelationId id);

/// "[X] was born in [Y]" + "Tokyo" -> "Tokyo was born in"
/// (subject substituted, pattern truncated before the object slot).
std::string instantiate_prompt(const std::string& pattern, const std::string& subject);

/// Same as instantiate_prompt but with a generic substitution and the
/// basic capitalization/grammar fixes applied ("He's" -> "His", sentence-
/// initial capital).
std::string instantiate_substituted_prompt(const std::string& pattern, const std::string& substitution);

/// Distinct lowercase/punctuation-free words appearing in any template,
/// e.g. for building toy vocabularies.
std::vector<std::string> all_template_words();

/// Serializes the embedded template table as TSV (relation, template_id,
/// subject_first, pattern).
std::string templates_tsv();

}  // namespace ct
