#include "ct/model_runner.hpp"

namespace ct {

EngineRunner::EngineRunner(const WeightBundle& weights)
    : weights_(weights), tokenizer_(make_tokenizer(weights)) {}

std::vector<Prediction> EngineRunner::topk(const std::string& prompt, int k) const {
    const TokenSequence seq = tokenizer_->encode(prompt);
    const ActivationTrace trace = forward_with_capture(weights_, seq.token_ids);
    const auto pairs = trace.topk(trace.n_positions - 1, k);
    std::vector<Prediction> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        Prediction p;
        p.token_text = tokenizer_->decode_token(pairs[i].first);
        p.rank = static_cast<int>(i) + 1;
        p.probability = pairs[i].second;
        out.push_back(std::move(p));
    }
    return out;
}

int EngineRunner::first_token_id(const std::string& text) const {
    return tokenizer_->first_token_id(text);
}

}  // namespace ct
