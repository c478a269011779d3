#pragma once
// Dependency-tree phrase analysis over CoNLL-U input.
//
// Nouns (UPOS NOUN or PROPN) are phrase centres. Every other token joins the
// phrase of its nearest noun in the undirected tree; ties go to the noun with
// the smaller token-index gap, then to the lower noun id. Each phrase is then
// given an ancestor phrase: the phrase of the first noun above it in the
// original tree.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qualmap/error.hpp"

namespace qualmap {

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorKind::Format, "line " + std::to_string(line) + ": " + message),
          line_(line),
          message_(message) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::size_t line_;
    std::string message_;
};

struct TokenNode {
    int id = 0;  // 1-based
    std::string form;
    std::string upos;
    int head = 0;  // 0 = root
    std::string deprel;
};

class SyntaxTree {
public:
    SyntaxTree() = default;
    // Validates ids, single root and acyclicity; throws ParseError (line 0) otherwise.
    explicit SyntaxTree(std::vector<TokenNode> nodes, std::string text = {});

    std::size_t size() const noexcept { return nodes_.size(); }
    const TokenNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id - 1)); }
    const std::vector<TokenNode>& nodes() const noexcept { return nodes_; }
    int root() const noexcept { return root_; }
    // Dependents of `id` in ascending id order.
    const std::vector<int>& children(int id) const { return children_.at(static_cast<std::size_t>(id - 1)); }
    bool is_noun(int id) const;

    // Surface text: the "# text" comment when present, else forms joined by spaces.
    const std::string& text() const noexcept { return text_; }

private:
    std::vector<TokenNode> nodes_;
    std::vector<std::vector<int>> children_;
    int root_ = 0;
    std::string text_;
};

struct ConlluOptions {
    // Attach the roots of later sentences under the first sentence's root
    // instead of discarding them.
    bool merge_sentences = false;
};

SyntaxTree parse_conllu(std::string_view text, const ConlluOptions& options = {});

struct PhraseSegmentation {
    std::vector<int> pns;                 // noun centres in token order
    std::map<int, std::vector<int>> phs;  // noun id -> member token ids, ascending
    std::map<int, int> ans;               // noun id -> ancestor noun id
    std::vector<int> phrase_of;           // token id - 1 -> noun id of its phrase

    int phrase(int token_id) const { return phrase_of.at(static_cast<std::size_t>(token_id - 1)); }
};

bool is_noun_tag(std::string_view upos);

// Fills pns, phs and phrase_of; ans is left empty.
PhraseSegmentation segment_phrases(const SyntaxTree& tree);

// Breadth-first walk from the root. Whenever an edge crosses a phrase
// boundary, the child's phrase takes the phrase of the first noun on the
// child's governor chain as its ancestor. Phrases never crossed into keep
// themselves.
std::map<int, int> get_phrase_ancestor(const SyntaxTree& tree, const PhraseSegmentation& seg);

// segment_phrases followed by get_phrase_ancestor.
PhraseSegmentation analyze_prompt(const SyntaxTree& tree);

// Member forms joined by single spaces.
std::string phrase_text(const SyntaxTree& tree, const PhraseSegmentation& seg, int noun_id);

}  // namespace qualmap
