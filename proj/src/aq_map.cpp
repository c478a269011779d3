#include "qualmap/aq_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "qualmap/error.hpp"
#include "qualmap/pq_map.hpp"

namespace qualmap {

std::vector<double> two_way_softmax(const TokenMatrix& tokens, std::span<const float> text_embed,
                                    std::span<const float> empty_embed) {
    const auto sp = cosine_logits(tokens, text_embed);
    const auto se = cosine_logits(tokens, empty_embed);
    std::vector<double> out(sp.size());
    for (std::size_t k = 0; k < sp.size(); ++k) {
        // e^sp / (e^sp + e^se), written to stay in (0,1) without overflow
        out[k] = 1.0 / (1.0 + std::exp(se[k] - sp[k]));
    }
    return out;
}

QualityMap alignment_map(const TokenMatrix& tokens, std::span<const float> text_embed,
                         std::span<const float> empty_embed, std::size_t height, std::size_t width) {
    const std::size_t side = grid_side(tokens);
    return tokens_to_map(two_way_softmax(tokens, text_embed, empty_embed), side, height, width);
}

PhraseAlignment align_phrase(const TokenMatrix& tokens, int phrase_id, std::span<const float> phrase_embed,
                             std::span<const float> noun_embed, std::span<const float> empty_embed,
                             std::size_t height, std::size_t width) {
    PhraseAlignment out;
    out.phrase_id = phrase_id;
    const std::size_t side = grid_side(tokens);
    const auto phrase_values = two_way_softmax(tokens, phrase_embed, empty_embed);
    const auto noun_values = two_way_softmax(tokens, noun_embed, empty_embed);
    out.map = tokens_to_map(phrase_values, side, height, width);
    out.score = phrase_values[0];
    out.noun_map = tokens_to_map(noun_values, side, height, width);
    out.noun_score = noun_values[0];
    return out;
}

std::string_view to_string(DefectKind kind) {
    switch (kind) {
        case DefectKind::NounUnmatched: return "noun_unmatched";
        case DefectKind::AdjUnmatched: return "adj_unmatched";
    }
    return "unknown";
}

void AlignmentThresholds::validate() const {
    if (!(a_bound > 0.0 && a_bound < 1.0)) {
        throw ConfigError("a_bound = " + std::to_string(a_bound) + " is outside (0, 1)");
    }
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta = " + std::to_string(beta) + " is outside (0, 1)");
}

std::vector<DefectRecord> classify_defects(std::span<const PhraseAlignment> alignments,
                                           const std::map<int, int>& ans,
                                           const AlignmentThresholds& thresholds) {
    thresholds.validate();
    std::vector<DefectRecord> out;
    for (const PhraseAlignment& pa : alignments) {
        if (pa.noun_score < thresholds.a_bound) {
            const auto it = ans.find(pa.phrase_id);
            if (it == ans.end()) {
                throw DimensionError("phrase " + std::to_string(pa.phrase_id) + " has no ancestor entry");
            }
            out.push_back({pa.phrase_id, DefectKind::NounUnmatched, it->second});
        } else if (pa.score < pa.noun_score) {
            out.push_back({pa.phrase_id, DefectKind::AdjUnmatched, pa.phrase_id});
        }
    }
    return out;
}

MergedAlignment merge_alignment_map(std::span<const DefectRecord> defects,
                                    const std::map<int, QualityMap>& noun_maps, std::size_t height,
                                    std::size_t width) {
    MergedAlignment out{QualityMap(height, width, 1.0f, 1.0f), !defects.empty()};
    for (const DefectRecord& d : defects) {
        const auto it = noun_maps.find(d.target);
        if (it == noun_maps.end()) {
            throw DimensionError("no noun map for defect target " + std::to_string(d.target));
        }
        const QualityMap& m = it->second;
        if (m.height != height || m.width != width || m.values.size() != height * width) {
            throw DimensionError("noun map " + std::to_string(d.target) + " is " + std::to_string(m.height) + "x" +
                                 std::to_string(m.width) + ", expected " + std::to_string(height) + "x" +
                                 std::to_string(width));
        }
        for (std::size_t i = 0; i < m.values.size(); ++i) out.map.values[i] *= m.values[i];
    }
    return out;
}

std::string EmphasizedPrompt::rendered() const {
    std::string out = original;
    for (const Emphasis& e : emphasis) {
        char weight[32];
        std::snprintf(weight, sizeof weight, "%g", e.weight);
        out += " (" + e.text + ":" + weight + ")";
    }
    return out;
}

EmphasizedPrompt emphasize_prompt(std::string prompt, std::span<const DefectRecord> defects,
                                  const std::map<int, std::string>& phrase_texts) {
    EmphasizedPrompt out{std::move(prompt), {}};
    std::set<int> defective;
    for (const DefectRecord& d : defects) defective.insert(d.phrase_id);
    for (int id : defective) {
        const auto it = phrase_texts.find(id);
        if (it == phrase_texts.end()) throw DimensionError("no phrase text for noun " + std::to_string(id));
        out.emphasis.push_back({it->second, kEmphasisWeight});
    }
    return out;
}

double alignment_score(double global_sim, std::span<const double> phrase_scores, double beta) {
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    double a = global_sim;
    for (double s : phrase_scores) a *= std::min(s / beta, 1.0);
    return a;
}

}  // namespace qualmap
