#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace ct {

/// Half-open character range [begin, end) into a source string.
struct CharSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return begin >= end; }
};

/// Half-open token index range [begin, end).
struct TokenSpan {
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
    bool empty() const { return begin >= end; }
    bool contains(int i) const { return i >= begin && i < end; }
};

/// A tokenized string. Character spans are byte offsets into the source
/// text; they are non-overlapping, increasing and cover the whole text
/// (each token absorbs the whitespace that precedes it).
struct TokenSequence {
    std::vector<int> token_ids;
    std::vector<CharSpan> char_offsets;
    std::string source;

    int size() const { return static_cast<int>(token_ids.size()); }
    std::string token_text(int i) const {
        const CharSpan& s = char_offsets.at(static_cast<std::size_t>(i));
        return source.substr(s.begin, s.end - s.begin);
    }
};

/// Pluggable text tokenizer. The engine only needs ids; the pipeline also
/// uses decode_token to compare model predictions against label strings.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual TokenSequence encode(const std::string& text) const = 0;
    virtual std::string decode_token(int token_id) const = 0;
    virtual int vocab_size() const = 0;

    /// Id of the first token the text would encode to.
    int first_token_id(const std::string& text) const;
};

/// Splits on whitespace, treats every non-alphanumeric character as its own
/// token, and decomposes words that are not in the vocabulary into single
/// bytes. Ids 0..255 are the byte tokens; word ids start at 256 in the
/// order the word list was given.
class WhitespaceTokenizer : public Tokenizer {
public:
    /// Byte-only tokenizer (vocab size 256).
    WhitespaceTokenizer();

    /// Byte tokens plus the given words (vocab size 256 + words.size()).
    explicit WhitespaceTokenizer(std::vector<std::string> words);

    TokenSequence encode(const std::string& text) const override;
    std::string decode_token(int token_id) const override;
    int vocab_size() const override;

    /// Word id, or -1 if the word is unknown.
    int word_id(std::string_view word) const;

    static constexpr int kByteTokens = 256;

private:
    std::vector<std::string> words_;
    // word -> id, built once
    std::vector<std::pair<std::string, int>> index_;
};

/// Tokenizes text and maps the subject's character span to the minimal
/// token range whose character offsets cover it. The text must begin with
/// the subject (subject-first prompts).
struct SubjectTokenization {
    TokenSequence tokens;
    TokenSpan subject_span;
};

SubjectTokenization tokenize_with_subject(const Tokenizer& tokenizer,
                                          const std::string& text,
                                          CharSpan subject_char_span);

}  // namespace ct
