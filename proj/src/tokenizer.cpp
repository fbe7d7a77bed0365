#include "ct/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace ct {

namespace {

bool is_word_char(unsigned char c) {
    return std::isalnum(c) != 0 || c == '_' || c >= 0x80;
}

}  // namespace

int Tokenizer::first_token_id(const std::string& text) const {
    const TokenSequence seq = encode(text);
    if (seq.token_ids.empty()) {
        throw std::invalid_argument("first_token_id: text produced no tokens");
    }
    return seq.token_ids.front();
}

WhitespaceTokenizer::WhitespaceTokenizer() = default;

WhitespaceTokenizer::WhitespaceTokenizer(std::vector<std::string> words)
    : words_(std::move(words)) {
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
        index_.emplace_back(words_[i], kByteTokens + static_cast<int>(i));
    }
    std::sort(index_.begin(), index_.end());
}

int WhitespaceTokenizer::vocab_size() const {
    return kByteTokens + static_cast<int>(words_.size());
}

int WhitespaceTokenizer::word_id(std::string_view word) const {
    auto it = std::lower_bound(index_.begin(), index_.end(), word,
                               [](const auto& entry, std::string_view w) { return entry.first < w; });
    if (it != index_.end() && it->first == word) {
        return it->second;
    }
    return -1;
}

std::string WhitespaceTokenizer::decode_token(int token_id) const {
    if (token_id < 0 || token_id >= vocab_size()) {
        throw std::out_of_range("decode_token: id out of range");
    }
    if (token_id < kByteTokens) {
        return std::string(1, static_cast<char>(token_id));
    }
    return words_[static_cast<std::size_t>(token_id - kByteTokens)];
}

TokenSequence WhitespaceTokenizer::encode(const std::string& text) const {
    if (text.empty()) {
        throw std::invalid_argument("encode: empty text");
    }
    TokenSequence seq;
    seq.source = text;

    // Each emitted token's char span starts where the previous one ended,
    // so spans absorb leading whitespace and cover the text.
    std::size_t span_start = 0;
    std::size_t i = 0;

    auto emit = [&](int id, std::size_t end) {
        seq.token_ids.push_back(id);
        seq.char_offsets.push_back(CharSpan{span_start, end});
        span_start = end;
    };

    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (is_word_char(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
            const std::string word = text.substr(i, j - i);
            const int id = word_id(word);
            if (id >= 0) {
                emit(id, j);
            } else {
                // Byte fallback: one token per byte of the word.
                for (std::size_t b = i; b < j; ++b) {
                    emit(static_cast<unsigned char>(text[b]), b + 1);
                }
            }
            i = j;
        } else {
            // Punctuation: a single-byte token.
            emit(c, i + 1);
            ++i;
        }
    }

    if (seq.token_ids.empty()) {
        throw std::invalid_argument("encode: text contains no tokens");
    }
    // Trailing whitespace belongs to the last token so spans cover the text.
    seq.char_offsets.back().end = text.size();
    return seq;
}

SubjectTokenization tokenize_with_subject(const Tokenizer& tokenizer,
                                          const std::string& text,
                                          CharSpan subject_char_span) {
    if (text.empty()) {
        throw std::invalid_argument("tokenize_with_subject: empty text");
    }
    if (subject_char_span.begin != 0) {
        throw std::invalid_argument("tokenize_with_subject: subject must be a prefix of the text");
    }
    if (subject_char_span.empty() || subject_char_span.end > text.size()) {
        throw std::invalid_argument("tokenize_with_subject: subject span outside text");
    }

    SubjectTokenization out;
    out.tokens = tokenizer.encode(text);

    // Minimal token range whose char offsets cover the subject span. The
    // subject starts at 0, so this is the prefix of tokens up to the first
    // token that ends at or beyond the subject end.
    int end_token = -1;
    for (int t = 0; t < out.tokens.size(); ++t) {
        if (out.tokens.char_offsets[static_cast<std::size_t>(t)].end >= subject_char_span.end) {
            end_token = t;
            break;
        }
    }
    if (end_token < 0) {
        throw std::invalid_argument("tokenize_with_subject: subject span not covered by tokens");
    }
    out.subject_span = TokenSpan{0, end_token + 1};
    return out;
}

}  // namespace ct
