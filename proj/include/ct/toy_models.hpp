#pragma once

#include "ct/weights.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ct {

/// Random Gaussian weights with layernorm-friendly scales. Deterministic
/// in (config, seed).
WeightBundle make_random_bundle(const ModelConfig& config, std::uint64_t seed);

/// A constructed model whose layer-1 MLP stores a subject -> object lookup
/// and whose layer-2 attention moves the looked-up value to the reading
/// position. Gives ground truth for localization tests: corrupting the
/// subject embedding destroys the prediction and restoring the layer-1 MLP
/// state at the subject token recovers it.
struct PlantedFact {
    std::string subject;  // single capitalized word, in the vocabulary
    std::string object;   // single capitalized word, in the vocabulary
    int subject_token = 0;
    int object_token = 0;
};

struct PlantedModel {
    WeightBundle bundle;
    std::vector<PlantedFact> facts;
    int lookup_layer = 1;
    int copy_layer = 2;
};

/// n_facts must be in [1, 50]. Construction is verified internally: the
/// clean forward pass of "<subject> was created in" must rank the planted
/// object first with probability > 0.5 for every fact.
PlantedModel make_planted_bundle(int n_facts, std::uint64_t seed);

}  // namespace ct
