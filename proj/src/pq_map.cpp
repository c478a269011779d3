#include "qualmap/pq_map.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qualmap/error.hpp"

namespace qualmap {

QualityTextBank::QualityTextBank(EmbeddingTensor rows) : rows_(std::move(rows)) {
    if (rows_.rows() != 2 * kQualityFactors) {
        throw DimensionError("quality text bank needs " + std::to_string(2 * kQualityFactors) +
                             " rows, found " + std::to_string(rows_.rows()));
    }
    for (std::size_t r = 0; r < rows_.rows(); ++r) {
        const auto row = rows_.row(r);
        if (std::all_of(row.begin(), row.end(), [](float v) { return v == 0.0f; })) {
            throw DegenerateInputError("quality text bank row " + std::to_string(r) + " is all zeros");
        }
    }
    for (std::size_t i = 0; i < kQualityFactors; ++i) {
        if (std::ranges::equal(positive(i), negative(i))) {
            throw DegenerateInputError("quality factor '" + std::string(kQualityFactorNames[i]) +
                                       "' has identical positive and negative embeddings");
        }
    }
}

std::vector<double> QualityTextBank::direction(std::size_t factor) const {
    const auto pos = positive(factor);
    const auto neg = negative(factor);
    std::vector<double> d(dim());
    for (std::size_t c = 0; c < d.size(); ++c) d[c] = static_cast<double>(pos[c]) - static_cast<double>(neg[c]);
    return d;
}

void PenaltyThresholds::validate() const {
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (!(alpha[i] > 0.0 && alpha[i] <= 1.0)) {
            throw ConfigError("alpha[" + std::to_string(i) + "] = " + std::to_string(alpha[i]) +
                              " is outside (0, 1]");
        }
    }
}

RawLogits raw_logits(const TokenMatrix& tokens, const QualityTextBank& bank) {
    if (tokens.cols() != bank.dim()) {
        throw DimensionError("image tokens have dim " + std::to_string(tokens.cols()) +
                             ", quality bank has dim " + std::to_string(bank.dim()));
    }
    RawLogits out;
    out.count = tokens.rows();
    for (std::size_t i = 0; i < kQualityFactors; ++i) {
        auto cos = cosine_logits(tokens, std::span<const double>(bank.direction(i)));
        for (double& v : cos) v = rescale_cosine(v);
        out.factor[i] = std::move(cos);
    }
    return out;
}

std::vector<double> cask_combine(const RawLogits& raw, const PenaltyThresholds& thresholds) {
    thresholds.validate();
    std::vector<double> out(raw.count);
    for (std::size_t k = 0; k < raw.count; ++k) {
        double v = raw.factor[0][k];
        for (std::size_t i = 1; i < kQualityFactors; ++i) {
            v *= std::min(raw.factor[i][k] / thresholds.alpha[i - 1], 1.0);
        }
        out[k] = v;
    }
    return out;
}

double catmull_rom_weight(double x) {
    constexpr double a = -0.5;
    x = std::fabs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

namespace {

// Source coordinate for destination index i under align-corners sampling.
double source_coord(std::size_t i, std::size_t src, std::size_t dst) {
    if (dst <= 1 || src <= 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(src - 1) / static_cast<double>(dst - 1);
}

struct Taps {
    std::array<std::size_t, 4> index;
    std::array<double, 4> weight;
};

Taps taps_for(double coord, std::size_t src) {
    Taps t{};
    const double base = std::floor(coord);
    const double frac = coord - base;
    const auto last = static_cast<long long>(src) - 1;
    for (int m = 0; m < 4; ++m) {
        const long long idx = static_cast<long long>(base) + m - 1;
        t.index[m] = static_cast<std::size_t>(std::clamp(idx, 0LL, last));
        t.weight[m] = catmull_rom_weight(frac - static_cast<double>(m - 1));
    }
    return t;
}

}  // namespace

std::vector<float> bicubic_upsample(std::span<const double> grid, std::size_t grid_h, std::size_t grid_w,
                                    std::size_t height, std::size_t width) {
    if (grid_h == 0 || grid_w == 0 || grid.size() != grid_h * grid_w) {
        throw DimensionError("bicubic input grid does not match its dimensions");
    }
    if (height < grid_h || width < grid_w) {
        throw DimensionError("bicubic target " + std::to_string(height) + "x" + std::to_string(width) +
                             " is smaller than the " + std::to_string(grid_h) + "x" +
                             std::to_string(grid_w) + " grid");
    }
    std::vector<Taps> col_taps(width);
    for (std::size_t x = 0; x < width; ++x) col_taps[x] = taps_for(source_coord(x, grid_w, width), grid_w);

    std::vector<float> out(height * width);
    for (std::size_t y = 0; y < height; ++y) {
        const Taps rt = taps_for(source_coord(y, grid_h, height), grid_h);
        for (std::size_t x = 0; x < width; ++x) {
            const Taps& ct = col_taps[x];
            double v = 0.0;
            for (int m = 0; m < 4; ++m) {
                double row = 0.0;
                const double* g = grid.data() + rt.index[m] * grid_w;
                for (int n = 0; n < 4; ++n) row += ct.weight[n] * g[ct.index[n]];
                v += rt.weight[m] * row;
            }
            out[y * width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return out;
}

QualityMap tokens_to_map(std::span<const double> per_token, std::size_t side, std::size_t height,
                         std::size_t width) {
    if (per_token.size() != 1 + side * side) {
        throw DimensionError("token values do not match a " + std::to_string(side) + "x" +
                             std::to_string(side) + " grid plus a global token");
    }
    QualityMap map;
    map.height = height;
    map.width = width;
    map.values = bicubic_upsample(per_token.subspan(1), side, side, height, width);
    map.summary = static_cast<float>(per_token[0]);
    return map;
}

QualityMap pq_map(const TokenMatrix& tokens, const QualityTextBank& bank,
                  const PenaltyThresholds& thresholds, std::size_t height, std::size_t width) {
    const std::size_t side = grid_side(tokens);
    const auto per_token = cask_combine(raw_logits(tokens, bank), thresholds);
    return tokens_to_map(per_token, side, height, width);
}

}  // namespace qualmap
