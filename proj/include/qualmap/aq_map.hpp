#pragma once
// Alignment quality: per-phrase maps, defect classification, map merging,
// prompt emphasis and the penalised alignment score.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qualmap/attention.hpp"
#include "qualmap/tensor_io.hpp"

namespace qualmap {

// e^{s_p} / (e^{s_p} + e^{s_e}) for every token, where s_p and s_e are the
// cosine similarities against the text and empty-string embeddings.
std::vector<double> two_way_softmax(const TokenMatrix& tokens, std::span<const float> text_embed,
                                    std::span<const float> empty_embed);

// Spatial part upsampled to height x width; summary is the global token's value.
QualityMap alignment_map(const TokenMatrix& tokens, std::span<const float> text_embed,
                         std::span<const float> empty_embed, std::size_t height, std::size_t width);

struct PhraseAlignment {
    int phrase_id = 0;     // noun id of the phrase centre
    QualityMap map;        // A_phs
    double score = 0.0;    // a_phs
    QualityMap noun_map;   // A_pns
    double noun_score = 0.0;  // a_pns
};

PhraseAlignment align_phrase(const TokenMatrix& tokens, int phrase_id, std::span<const float> phrase_embed,
                             std::span<const float> noun_embed, std::span<const float> empty_embed,
                             std::size_t height, std::size_t width);

enum class DefectKind { NounUnmatched, AdjUnmatched };

std::string_view to_string(DefectKind kind);

struct DefectRecord {
    int phrase_id = 0;
    DefectKind kind = DefectKind::NounUnmatched;
    int target = 0;  // noun whose map is applied

    bool operator==(const DefectRecord&) const = default;
};

struct AlignmentThresholds {
    double a_bound = 0.5;
    double beta = 0.5;

    void validate() const;
};

// Noun-unmatched (a_pns < a_bound) takes priority and targets the phrase
// ancestor; otherwise adj-unmatched (a_phs < a_pns) targets the phrase itself.
std::vector<DefectRecord> classify_defects(std::span<const PhraseAlignment> alignments,
                                           const std::map<int, int>& ans,
                                           const AlignmentThresholds& thresholds);

struct MergedAlignment {
    QualityMap map;  // all ones unless a defect fired
    bool fired = false;
};

// Starting from an all-ones map, multiply in noun_maps[target] for every
// defect, in list order.
MergedAlignment merge_alignment_map(std::span<const DefectRecord> defects,
                                    const std::map<int, QualityMap>& noun_maps, std::size_t height,
                                    std::size_t width);

inline constexpr double kEmphasisWeight = 1.1;

struct Emphasis {
    std::string text;
    double weight = kEmphasisWeight;

    bool operator==(const Emphasis&) const = default;
};

struct EmphasizedPrompt {
    std::string original;
    std::vector<Emphasis> emphasis;

    // original + " (text:1.1)" per entry
    std::string rendered() const;
};

// One entry per defective phrase, ordered by noun id. `phrase_texts` maps
// noun id to the phrase's surface text.
EmphasizedPrompt emphasize_prompt(std::string prompt, std::span<const DefectRecord> defects,
                                  const std::map<int, std::string>& phrase_texts);

// global_sim * prod_j min(phrase_scores[j] / beta, 1)
double alignment_score(double global_sim, std::span<const double> phrase_scores, double beta);

}  // namespace qualmap
