#pragma once

#include "ct/entities.hpp"
#include "ct/relations.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ct {

/// Regional flavor of a generated name.
enum class NameStyle {
    dnd_human,
    russian,
    french,
    german,
    korean,
    japanese,
    place,
    organisation,
};

const char* name_style_name(NameStyle style);
NameStyle name_style_from_name(const std::string& name);

/// Person-name styles (the first six).
const std::vector<NameStyle>& person_styles();

/// Styles whose names fit a relation's subject type: person names for
/// person-subject relations, place names for capitals, organisation-ish
/// names for the rest.
const std::vector<NameStyle>& styles_for_relation(RelationId relation);

struct SyntheticSubject {
    std::string name;
    NameStyle style = NameStyle::dnd_human;
    bool entity_collision_checked = false;
};

/// Deterministic syllable-template generator with per-style inventories.
class SyntheticNameGenerator {
public:
    explicit SyntheticNameGenerator(std::uint64_t seed);

    /// One raw name; no uniqueness or collision guarantees.
    std::string generate(NameStyle style);

    /// n deduplicated names, round-robin over the styles, each checked
    /// against the entity set (exact label match). Throws when the retry
    /// budget is exhausted before n unique non-colliding names are found.
    std::vector<SyntheticSubject> generate_batch(const std::vector<NameStyle>& styles, int n,
                                                 const EntityChecker& entities,
                                                 int retries_per_name = 200);

private:
    std::mt19937_64 rng_;

    std::string pick(const std::vector<std::string>& options);
};

}  // namespace ct
