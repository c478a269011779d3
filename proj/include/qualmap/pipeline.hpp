#pragma once
// Loading engine inputs from disk and composing the quality maps and plan.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qualmap/aq_map.hpp"
#include "qualmap/attention.hpp"
#include "qualmap/pq_map.hpp"
#include "qualmap/prompt_parser.hpp"
#include "qualmap/refine_planner.hpp"

namespace qualmap {

// Text embeddings for the prompt analysis.
//
// On disk: a GRT tensor with 2 + 2n rows
//   [full prompt, empty string, phrase_1 .. phrase_n, noun_1 .. noun_n]
// in noun-id order, plus a JSON sidecar
//   {"phrases": [{"noun_id": 3, "text": "a red cat", "noun": "cat"}, ...]}
struct PhraseEmbeddings {
    struct Entry {
        int noun_id = 0;
        std::string text;
        std::string noun;
        std::vector<float> phrase_embed;
        std::vector<float> noun_embed;
    };

    std::vector<float> prompt_embed;
    std::vector<float> empty_embed;
    std::vector<Entry> phrases;

    std::size_t dim() const noexcept { return prompt_embed.size(); }
};

// Sidecar path for a phrase-embedding tensor: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& grt);

PhraseEmbeddings load_phrase_embeddings(const std::filesystem::path& grt, const std::filesystem::path& sidecar);
void save_phrase_embeddings(const PhraseEmbeddings& embeds, const std::filesystem::path& grt,
                            const std::filesystem::path& sidecar);

struct AqResult {
    SyntaxTree tree;
    PhraseSegmentation segmentation;
    std::map<int, std::string> phrase_texts;
    std::vector<PhraseAlignment> alignments;
    std::vector<DefectRecord> defects;
    MergedAlignment merged;
    EmphasizedPrompt prompt;
    double global_sim = 0.0;  // rescaled cosine of full prompt vs global token
    double a = 0.0;
};

// Phrase analysis, per-phrase alignment, defect classification, merge,
// emphasis and alignment score. `prompt` overrides the tree's surface text.
AqResult compute_aq(const TokenMatrix& tokens, SyntaxTree tree, const PhraseEmbeddings& embeds,
                    const AlignmentThresholds& thresholds, std::size_t height, std::size_t width,
                    std::optional<std::string> prompt = std::nullopt);

struct PlanResult {
    QualityMap perceptual;
    AqResult alignment;
    QualityMap fused;
    RefinePlan plan;
};

PlanResult compute_plan(const TokenMatrix& tokens, const QualityTextBank& bank, SyntaxTree tree,
                        const PhraseEmbeddings& embeds, const PlanSettings& settings, std::size_t height,
                        std::size_t width, std::optional<std::string> prompt = std::nullopt,
                        std::string image = {});

}  // namespace qualmap
