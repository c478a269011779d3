#pragma once
// GRT tensor files and 8-bit grayscale PNG heatmaps.
//
// GRT layout (all integers and floats little-endian):
//   "GRT1" | u32 rank | rank x u32 dims | prod(dims) x f32 payload
//
// Nothing else follows the payload; trailing bytes are rejected.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qualmap/error.hpp"

namespace qualmap {

// Row-major rows x cols matrix of finite 32-bit floats.
class EmbeddingTensor {
public:
    EmbeddingTensor() = default;
    EmbeddingTensor(std::size_t rows, std::size_t cols);
    EmbeddingTensor(std::size_t rows, std::size_t cols, std::vector<float> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<const float> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    const std::vector<float>& data() const noexcept { return data_; }

    bool operator==(const EmbeddingTensor&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

// H x W float map plus its scalar summary (p or a).
struct QualityMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;
    float summary = 0.0f;

    QualityMap() = default;
    QualityMap(std::size_t h, std::size_t w, float fill = 0.0f, float score = 0.0f)
        : height(h), width(w), values(h * w, fill), summary(score) {}

    float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
    float& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
};

class TensorIoError : public Error {
public:
    enum class Code { NotFound, Io, BadMagic, BadHeader, Truncated, TrailingData, NonFinite };

    TensorIoError(Code code, const std::string& what);
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

// Generic GRT payload of any rank.
struct GrtArray {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

GrtArray decode_grt(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_grt(std::span<const std::uint32_t> dims,
                                     std::span<const float> data);

EmbeddingTensor load_tensor(const std::filesystem::path& path);
void save_tensor(const EmbeddingTensor& tensor, const std::filesystem::path& path);

// Quality maps are stored as rank-2 GRT (height x width); the summary is not persisted.
QualityMap load_quality_map(const std::filesystem::path& path);
void save_quality_map(const QualityMap& map, const std::filesystem::path& path);

// round(255 * clamp01(v)), half away from zero.
std::uint8_t heatmap_level(float v);

void render_heatmap(const QualityMap& map, const std::filesystem::path& path);

// 8-bit grayscale image. Used for masks and for reading heatmaps back.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
};

void write_gray_png(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_gray_png(const std::filesystem::path& path);

// Writes bytes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace qualmap
