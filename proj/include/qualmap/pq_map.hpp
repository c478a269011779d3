#pragma once
// Perceptual quality map P and score p.
//
// Each quality factor i contributes a direction pos_i - neg_i. Token logits
// against those directions are rescaled into [0,1]; the overall factor is then
// penalised multiplicatively by every defect factor that falls under its
// threshold (a weak factor drags the score down, a strong one cannot lift it).

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "qualmap/attention.hpp"
#include "qualmap/tensor_io.hpp"

namespace qualmap {

inline constexpr std::size_t kQualityFactors = 4;
inline constexpr std::size_t kDefectFactors = kQualityFactors - 1;
inline constexpr std::array<std::string_view, kQualityFactors> kQualityFactorNames = {
    "overall", "technical", "rationality", "naturalness"};

// Four (positive, negative) text-embedding pairs. Index 0 is overall quality,
// 1..3 the defect factors in kQualityFactorNames order.
class QualityTextBank {
public:
    // Rows must be [pos0, neg0, pos1, neg1, pos2, neg2, pos3, neg3].
    explicit QualityTextBank(EmbeddingTensor rows);

    std::size_t dim() const noexcept { return rows_.cols(); }
    std::span<const float> positive(std::size_t factor) const { return rows_.row(2 * factor); }
    std::span<const float> negative(std::size_t factor) const { return rows_.row(2 * factor + 1); }

    // pos_i - neg_i
    std::vector<double> direction(std::size_t factor) const;

    const EmbeddingTensor& tensor() const noexcept { return rows_; }

private:
    EmbeddingTensor rows_;
};

struct PenaltyThresholds {
    std::array<double, kDefectFactors> alpha{0.5, 0.5, 0.5};

    void validate() const;
};

// 4 x N matrix of rescaled logits, one row per quality factor.
struct RawLogits {
    std::size_t count = 0;
    std::array<std::vector<double>, kQualityFactors> factor;
};

// (cos + 1) / 2
inline double rescale_cosine(double c) { return (c + 1.0) / 2.0; }

RawLogits raw_logits(const TokenMatrix& tokens, const QualityTextBank& bank);

// L_per[k] = L_raw[0][k] * prod_i min(L_raw[i][k] / alpha[i], 1)
std::vector<double> cask_combine(const RawLogits& raw, const PenaltyThresholds& thresholds);

// Catmull-Rom (a = -0.5) resampling with align-corners sampling and edge
// clamping; output values are clamped to [0,1].
std::vector<float> bicubic_upsample(std::span<const double> grid, std::size_t grid_h, std::size_t grid_w,
                                    std::size_t height, std::size_t width);

// Catmull-Rom kernel weight for offset x.
double catmull_rom_weight(double x);

// Map spatial token values (indices 1..L) to an H x W map; summary = values[0].
QualityMap tokens_to_map(std::span<const double> per_token, std::size_t side, std::size_t height,
                         std::size_t width);

QualityMap pq_map(const TokenMatrix& tokens, const QualityTextBank& bank,
                  const PenaltyThresholds& thresholds, std::size_t height, std::size_t width);

}  // namespace qualmap
