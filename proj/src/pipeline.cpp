#include "qualmap/pipeline.hpp"

#include <cstdint>

#include "json.hpp"

#include "qualmap/error.hpp"
#include "qualmap/tensor_io.hpp"

namespace qualmap {

using nlohmann::json;

std::filesystem::path sidecar_path(const std::filesystem::path& grt) {
    std::filesystem::path p = grt;
    p.replace_extension(".json");
    return p;
}

PhraseEmbeddings load_phrase_embeddings(const std::filesystem::path& grt, const std::filesystem::path& sidecar) {
    const EmbeddingTensor rows = load_tensor(grt);
    const auto bytes = read_file_bytes(sidecar);
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Format, "'" + sidecar.string() + "': " + e.what());
    }
    if (!doc.is_object() || !doc.contains("phrases") || !doc["phrases"].is_array()) {
        throw Error(ErrorKind::Format, "'" + sidecar.string() + "': expected an object with a \"phrases\" array");
    }
    const auto& list = doc["phrases"];
    const std::size_t n = list.size();
    if (rows.rows() != 2 + 2 * n) {
        throw DimensionError("'" + grt.string() + "' has " + std::to_string(rows.rows()) + " rows; sidecar lists " +
                             std::to_string(n) + " phrases, expecting " + std::to_string(2 + 2 * n));
    }
    auto copy_row = [&](std::size_t r) {
        const auto s = rows.row(r);
        return std::vector<float>(s.begin(), s.end());
    };
    PhraseEmbeddings out;
    out.prompt_embed = copy_row(0);
    out.empty_embed = copy_row(1);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& item = list[j];
        if (!item.is_object() || !item.contains("noun_id") || !item["noun_id"].is_number_integer() ||
            !item.contains("text") || !item["text"].is_string()) {
            throw Error(ErrorKind::Format, "'" + sidecar.string() + "': phrase " + std::to_string(j) +
                                               " needs integer \"noun_id\" and string \"text\"");
        }
        PhraseEmbeddings::Entry e;
        e.noun_id = item["noun_id"].get<int>();
        e.text = item["text"].get<std::string>();
        e.noun = item.value("noun", std::string{});
        e.phrase_embed = copy_row(2 + j);
        e.noun_embed = copy_row(2 + n + j);
        out.phrases.push_back(std::move(e));
    }
    return out;
}

void save_phrase_embeddings(const PhraseEmbeddings& embeds, const std::filesystem::path& grt,
                            const std::filesystem::path& sidecar) {
    const std::size_t n = embeds.phrases.size();
    const std::size_t d = embeds.dim();
    std::vector<float> data;
    data.reserve((2 + 2 * n) * d);
    auto push = [&](const std::vector<float>& row) {
        if (row.size() != d) throw DimensionError("phrase embedding rows differ in dimension");
        data.insert(data.end(), row.begin(), row.end());
    };
    push(embeds.prompt_embed);
    push(embeds.empty_embed);
    for (const auto& e : embeds.phrases) push(e.phrase_embed);
    for (const auto& e : embeds.phrases) push(e.noun_embed);
    save_tensor(EmbeddingTensor(2 + 2 * n, d, std::move(data)), grt);

    json list = json::array();
    for (const auto& e : embeds.phrases) list.push_back({{"noun_id", e.noun_id}, {"text", e.text}, {"noun", e.noun}});
    write_file_atomic(sidecar, json{{"phrases", list}}.dump(2) + "\n");
}

AqResult compute_aq(const TokenMatrix& tokens, SyntaxTree tree, const PhraseEmbeddings& embeds,
                    const AlignmentThresholds& thresholds, std::size_t height, std::size_t width,
                    std::optional<std::string> prompt) {
    thresholds.validate();
    AqResult r;
    r.tree = std::move(tree);
    r.segmentation = analyze_prompt(r.tree);
    const auto& pns = r.segmentation.pns;

    if (embeds.phrases.size() != pns.size()) {
        throw DimensionError("prompt has " + std::to_string(pns.size()) + " phrases, embeddings cover " +
                             std::to_string(embeds.phrases.size()));
    }
    if (embeds.dim() != tokens.cols()) {
        throw DimensionError("text embeddings have dim " + std::to_string(embeds.dim()) + ", image tokens " +
                             std::to_string(tokens.cols()));
    }
    for (std::size_t j = 0; j < pns.size(); ++j) {
        const auto& e = embeds.phrases[j];
        const std::string text = phrase_text(r.tree, r.segmentation, pns[j]);
        if (e.noun_id != pns[j]) {
            throw Error(ErrorKind::Format, "embedding " + std::to_string(j) + " is for noun " +
                                               std::to_string(e.noun_id) + ", prompt analysis expects noun " +
                                               std::to_string(pns[j]));
        }
        if (e.text != text) {
            throw Error(ErrorKind::Format, "embedding for noun " + std::to_string(e.noun_id) + " was made from '" +
                                               e.text + "', prompt analysis gives '" + text + "'");
        }
        r.phrase_texts[pns[j]] = text;
        r.alignments.push_back(
            align_phrase(tokens, pns[j], e.phrase_embed, e.noun_embed, embeds.empty_embed, height, width));
    }

    r.defects = classify_defects(r.alignments, r.segmentation.ans, thresholds);
    std::map<int, QualityMap> noun_maps;
    for (const auto& pa : r.alignments) noun_maps.emplace(pa.phrase_id, pa.noun_map);
    r.merged = merge_alignment_map(r.defects, noun_maps, height, width);
    r.prompt = emphasize_prompt(prompt.value_or(r.tree.text()), r.defects, r.phrase_texts);

    r.global_sim = rescale_cosine(cosine(tokens.row(0), embeds.prompt_embed));
    std::vector<double> scores;
    for (const auto& pa : r.alignments) scores.push_back(pa.score);
    r.a = alignment_score(r.global_sim, scores, thresholds.beta);
    return r;
}

PlanResult compute_plan(const TokenMatrix& tokens, const QualityTextBank& bank, SyntaxTree tree,
                        const PhraseEmbeddings& embeds, const PlanSettings& settings, std::size_t height,
                        std::size_t width, std::optional<std::string> prompt, std::string image) {
    settings.alpha.validate();
    settings.planner.validate();
    PlanResult r;
    r.perceptual = pq_map(tokens, bank, settings.alpha, height, width);
    r.alignment = compute_aq(tokens, std::move(tree), embeds, settings.alignment, height, width, std::move(prompt));
    r.fused = fuse_quality_maps(r.perceptual, r.alignment.merged.map, r.alignment.merged.fired);
    BinaryMask mask = binarize(r.fused, settings.planner.tau);
    const double p = static_cast<double>(r.perceptual.summary);
    r.plan = plan_refinement(p, r.alignment.a, std::move(mask), r.alignment.prompt, settings, std::move(image));
    return r;
}

}  // namespace qualmap
