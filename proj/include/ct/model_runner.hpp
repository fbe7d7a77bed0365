#pragma once

#include "ct/diagnostics.hpp"
#include "ct/model.hpp"
#include "ct/weights.hpp"

#include <memory>

namespace ct {

/// ModelRunner backed by the inference engine. Safe for concurrent use;
/// the bundle must outlive the runner.
class EngineRunner : public ModelRunner {
public:
    explicit EngineRunner(const WeightBundle& weights);

    std::vector<Prediction> topk(const std::string& prompt, int k) const override;
    int first_token_id(const std::string& text) const override;

    const Tokenizer& tokenizer() const { return *tokenizer_; }
    const WeightBundle& weights() const { return weights_; }

private:
    const WeightBundle& weights_;
    std::unique_ptr<Tokenizer> tokenizer_;
};

}  // namespace ct
