#include "qualmap/prompt_parser.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <deque>
#include <limits>
#include <tuple>

namespace qualmap {

bool is_noun_tag(std::string_view upos) { return upos == "NOUN" || upos == "PROPN"; }

SyntaxTree::SyntaxTree(std::vector<TokenNode> nodes, std::string text)
    : nodes_(std::move(nodes)), text_(std::move(text)) {
    const int n = static_cast<int>(nodes_.size());
    if (n == 0) throw ParseError(0, "sentence has no tokens");
    children_.resize(nodes_.size());
    for (int i = 0; i < n; ++i) {
        const TokenNode& t = nodes_[static_cast<std::size_t>(i)];
        if (t.id != i + 1) throw ParseError(0, "token ids are not contiguous from 1");
        if (t.head < 0 || t.head > n) {
            throw ParseError(0, "token " + std::to_string(t.id) + " has head " + std::to_string(t.head) +
                                    " outside the sentence");
        }
        if (t.head == t.id) throw ParseError(0, "token " + std::to_string(t.id) + " heads itself");
        if (t.head == 0) {
            if (root_ != 0) throw ParseError(0, "sentence has more than one root");
            root_ = t.id;
        } else {
            children_[static_cast<std::size_t>(t.head - 1)].push_back(t.id);
        }
    }
    if (root_ == 0) throw ParseError(0, "sentence has no root (no token with head 0)");
    // Every token must reach the root within n steps.
    for (const TokenNode& t : nodes_) {
        int cur = t.id;
        for (int steps = 0; cur != 0; ++steps) {
            if (steps > n) throw ParseError(0, "cyclic head chain through token " + std::to_string(t.id));
            cur = nodes_[static_cast<std::size_t>(cur - 1)].head;
        }
    }
    if (text_.empty()) {
        for (const TokenNode& t : nodes_) {
            if (!text_.empty()) text_ += ' ';
            text_ += t.form;
        }
    }
}

bool SyntaxTree::is_noun(int id) const { return is_noun_tag(node(id).upos); }

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        cols.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return cols;
}

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

struct RawSentence {
    std::vector<TokenNode> nodes;
    std::vector<std::size_t> lines;  // source line of each node
    std::string text;
    std::size_t first_line = 0;
};

// Checks one sentence and rethrows tree errors with the offending line.
void validate_sentence(const RawSentence& s) {
    const int n = static_cast<int>(s.nodes.size());
    int root_line_seen = 0;
    for (int i = 0; i < n; ++i) {
        const TokenNode& t = s.nodes[static_cast<std::size_t>(i)];
        const std::size_t line = s.lines[static_cast<std::size_t>(i)];
        if (t.id != i + 1) {
            throw ParseError(line, "expected token id " + std::to_string(i + 1) + ", found " + std::to_string(t.id));
        }
        if (t.head > n) {
            throw ParseError(line, "head " + std::to_string(t.head) + " refers past the last token " + std::to_string(n));
        }
        if (t.head == t.id) throw ParseError(line, "token " + std::to_string(t.id) + " heads itself");
        if (t.head == 0) {
            if (root_line_seen != 0) {
                throw ParseError(line, "second root (first root on line " + std::to_string(root_line_seen) + ")");
            }
            root_line_seen = static_cast<int>(line);
        }
    }
    if (root_line_seen == 0) throw ParseError(s.first_line, "sentence has no root (no token with head 0)");
    for (int i = 0; i < n; ++i) {
        int cur = i + 1;
        for (int steps = 0; cur != 0; ++steps) {
            if (steps > n) {
                throw ParseError(s.lines[static_cast<std::size_t>(i)],
                                 "cyclic head chain through token " + std::to_string(i + 1));
            }
            cur = s.nodes[static_cast<std::size_t>(cur - 1)].head;
        }
    }
}

}  // namespace

SyntaxTree parse_conllu(std::string_view text, const ConlluOptions& options) {
    std::vector<RawSentence> sentences;
    RawSentence current;
    std::size_t line_no = 0;
    std::size_t pos = 0;

    auto finish = [&] {
        if (!current.nodes.empty()) {
            validate_sentence(current);
            sentences.push_back(std::move(current));
        }
        current = RawSentence{};
    };

    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            finish();
            if (!sentences.empty() && !options.merge_sentences) break;
            continue;
        }
        if (line.front() == '#') {
            constexpr std::string_view kText = "# text = ";
            if (line.starts_with(kText) && current.text.empty()) current.text = std::string(line.substr(kText.size()));
            continue;
        }
        const auto cols = split_tabs(line);
        if (cols.size() != 10) {
            throw ParseError(line_no, "expected 10 tab-separated columns, found " + std::to_string(cols.size()));
        }
        // Multiword ranges (1-2) and empty nodes (1.1) carry no tree structure.
        if (cols[0].find_first_of("-.") != std::string_view::npos) continue;

        TokenNode node;
        if (!parse_int(cols[0], node.id) || node.id < 1) {
            throw ParseError(line_no, "malformed ID column '" + std::string(cols[0]) + "'");
        }
        if (!parse_int(cols[6], node.head) || node.head < 0) {
            throw ParseError(line_no, "malformed HEAD column '" + std::string(cols[6]) + "'");
        }
        if (cols[1].empty()) throw ParseError(line_no, "empty FORM column");
        if (cols[3].empty()) throw ParseError(line_no, "empty UPOS column");
        node.form = std::string(cols[1]);
        node.upos = std::string(cols[3]);
        node.deprel = std::string(cols[7]);
        if (current.nodes.empty()) current.first_line = line_no;
        current.nodes.push_back(std::move(node));
        current.lines.push_back(line_no);
    }
    finish();

    if (sentences.empty()) throw ParseError(line_no, "no tokens found");

    RawSentence merged = std::move(sentences.front());
    if (options.merge_sentences) {
        const int first_root = std::find_if(merged.nodes.begin(), merged.nodes.end(),
                                            [](const TokenNode& t) { return t.head == 0; })->id;
        for (std::size_t s = 1; s < sentences.size(); ++s) {
            const int offset = static_cast<int>(merged.nodes.size());
            for (TokenNode t : sentences[s].nodes) {
                t.id += offset;
                t.head = t.head == 0 ? first_root : t.head + offset;
                merged.nodes.push_back(std::move(t));
            }
            if (!sentences[s].text.empty() && !merged.text.empty()) merged.text += ' ' + sentences[s].text;
        }
    }
    return SyntaxTree(std::move(merged.nodes), std::move(merged.text));
}

namespace {

// Hop distance from `source` to every node over undirected tree edges.
std::vector<int> tree_distances(const SyntaxTree& tree, int source) {
    std::vector<int> dist(tree.size(), -1);
    std::deque<int> queue{source};
    dist[static_cast<std::size_t>(source - 1)] = 0;
    while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        const int d = dist[static_cast<std::size_t>(cur - 1)];
        auto visit = [&](int next) {
            if (next != 0 && dist[static_cast<std::size_t>(next - 1)] < 0) {
                dist[static_cast<std::size_t>(next - 1)] = d + 1;
                queue.push_back(next);
            }
        };
        visit(tree.node(cur).head);
        for (int c : tree.children(cur)) visit(c);
    }
    return dist;
}

}  // namespace

PhraseSegmentation segment_phrases(const SyntaxTree& tree) {
    PhraseSegmentation seg;
    for (const TokenNode& t : tree.nodes()) {
        if (tree.is_noun(t.id)) seg.pns.push_back(t.id);
    }
    const int n = static_cast<int>(tree.size());
    seg.phrase_of.assign(tree.size(), 0);

    if (seg.pns.empty()) {
        const int root = tree.root();
        seg.pns.push_back(root);
        auto& members = seg.phs[root];
        for (int id = 1; id <= n; ++id) {
            members.push_back(id);
            seg.phrase_of[static_cast<std::size_t>(id - 1)] = root;
        }
        return seg;
    }

    std::vector<std::vector<int>> dist;
    dist.reserve(seg.pns.size());
    for (int noun : seg.pns) dist.push_back(tree_distances(tree, noun));

    for (int id = 1; id <= n; ++id) {
        std::tuple<int, int, int> best{std::numeric_limits<int>::max(), 0, 0};
        for (std::size_t j = 0; j < seg.pns.size(); ++j) {
            const int noun = seg.pns[j];
            const std::tuple<int, int, int> key{dist[j][static_cast<std::size_t>(id - 1)], std::abs(id - noun), noun};
            if (key < best) best = key;
        }
        const int owner = std::get<2>(best);
        seg.phrase_of[static_cast<std::size_t>(id - 1)] = owner;
        seg.phs[owner].push_back(id);
    }
    return seg;
}

std::map<int, int> get_phrase_ancestor(const SyntaxTree& tree, const PhraseSegmentation& seg) {
    std::map<int, int> ans;
    for (int pn : seg.pns) ans[pn] = pn;

    std::deque<int> queue{tree.root()};
    while (!queue.empty()) {
        const int obj = queue.front();
        queue.pop_front();
        for (int child : tree.children(obj)) {
            queue.push_back(child);
            if (seg.phrase(obj) == seg.phrase(child)) continue;
            for (int up = obj; up != 0; up = tree.node(up).head) {
                if (tree.is_noun(up)) {
                    ans[seg.phrase(child)] = seg.phrase(up);
                    break;
                }
            }
        }
    }
    return ans;
}

PhraseSegmentation analyze_prompt(const SyntaxTree& tree) {
    PhraseSegmentation seg = segment_phrases(tree);
    seg.ans = get_phrase_ancestor(tree, seg);
    return seg;
}

std::string phrase_text(const SyntaxTree& tree, const PhraseSegmentation& seg, int noun_id) {
    std::string out;
    for (int id : seg.phs.at(noun_id)) {
        if (!out.empty()) out += ' ';
        out += tree.node(id).form;
    }
    return out;
}

}  // namespace qualmap
