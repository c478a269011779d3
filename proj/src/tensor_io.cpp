#include "qualmap/tensor_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

namespace qualmap {

namespace {

constexpr std::uint8_t kMagic[4] = {'G', 'R', 'T', '1'};

std::uint32_t read_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void append_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::string describe(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

}  // namespace

EmbeddingTensor::EmbeddingTensor(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

EmbeddingTensor::EmbeddingTensor(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }
}

TensorIoError::TensorIoError(Code code, const std::string& what)
    : Error(code == Code::NotFound ? ErrorKind::MissingInput
            : code == Code::Io     ? ErrorKind::Io
            : code == Code::NonFinite ? ErrorKind::Degenerate
                                      : ErrorKind::Format,
            what),
      code_(code) {}

GrtArray decode_grt(std::span<const std::uint8_t> bytes) {
    using Code = TensorIoError::Code;
    if (bytes.size() < 8 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw TensorIoError(Code::BadMagic, "not a GRT file (expected magic \"GRT1\")");
    }
    const std::uint32_t rank = read_u32le(bytes.data() + 4);
    if (rank == 0 || rank > 8) {
        throw TensorIoError(Code::BadHeader, "unsupported GRT rank " + std::to_string(rank));
    }
    const std::size_t header = 8 + 4 * static_cast<std::size_t>(rank);
    if (bytes.size() < header) {
        throw TensorIoError(Code::Truncated, "GRT header truncated");
    }
    GrtArray out;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t d = read_u32le(bytes.data() + 8 + 4 * i);
        if (d == 0) throw TensorIoError(Code::BadHeader, "GRT dimension " + std::to_string(i) + " is zero");
        out.dims.push_back(d);
        count *= d;
        if (count > (bytes.size() - header) / 4 + 1) {
            // Further multiplication can only grow; payload is already too short.
            throw TensorIoError(Code::Truncated, "GRT payload truncated");
        }
    }
    const std::size_t payload = bytes.size() - header;
    if (payload < count * 4) {
        throw TensorIoError(Code::Truncated, "GRT payload truncated: expected " +
                                                 std::to_string(count * 4) + " bytes, found " +
                                                 std::to_string(payload));
    }
    if (payload > count * 4) {
        throw TensorIoError(Code::TrailingData, "GRT file has " +
                                                    std::to_string(payload - count * 4) +
                                                    " trailing bytes");
    }
    out.data.resize(count);
    const std::uint8_t* p = bytes.data() + header;
    for (std::size_t i = 0; i < count; ++i, p += 4) {
        const float v = std::bit_cast<float>(read_u32le(p));
        if (!std::isfinite(v)) {
            throw TensorIoError(Code::NonFinite, "non-finite value at element " + std::to_string(i));
        }
        out.data[i] = v;
    }
    return out;
}

std::vector<std::uint8_t> encode_grt(std::span<const std::uint32_t> dims, std::span<const float> data) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.reserve(8 + 4 * dims.size() + 4 * data.size());
    append_u32le(out, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) append_u32le(out, d);
    for (float v : data) append_u32le(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    using Code = TensorIoError::Code;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw TensorIoError(Code::NotFound, describe(path) + " not found");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TensorIoError(Code::Io, "cannot open " + describe(path));
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw TensorIoError(Code::Io, "read failed on " + describe(path));
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw TensorIoError(TensorIoError::Code::Io, "cannot write " + describe(tmp));
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw TensorIoError(TensorIoError::Code::Io, "write failed on " + describe(tmp));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw TensorIoError(TensorIoError::Code::Io, "cannot move result to " + describe(path));
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

EmbeddingTensor load_tensor(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    GrtArray arr;
    try {
        arr = decode_grt(bytes);
    } catch (const TensorIoError& e) {
        throw TensorIoError(e.code(), describe(path) + ": " + e.what());
    }
    if (arr.dims.size() != 2) {
        throw TensorIoError(TensorIoError::Code::BadHeader,
                            describe(path) + ": expected a rank-2 tensor, found rank " +
                                std::to_string(arr.dims.size()));
    }
    return EmbeddingTensor(arr.dims[0], arr.dims[1], std::move(arr.data));
}

void save_tensor(const EmbeddingTensor& tensor, const std::filesystem::path& path) {
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(tensor.rows()),
                                   static_cast<std::uint32_t>(tensor.cols())};
    write_file_atomic(path, encode_grt(dims, tensor.data()));
}

QualityMap load_quality_map(const std::filesystem::path& path) {
    EmbeddingTensor t = load_tensor(path);
    QualityMap map;
    map.height = t.rows();
    map.width = t.cols();
    map.values = t.data();
    return map;
}

void save_quality_map(const QualityMap& map, const std::filesystem::path& path) {
    if (map.values.size() != map.height * map.width) {
        throw DimensionError("quality map data does not match its dimensions");
    }
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(map.height),
                                   static_cast<std::uint32_t>(map.width)};
    write_file_atomic(path, encode_grt(dims, map.values));
}

std::uint8_t heatmap_level(float v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(255.0 * c));
}

void render_heatmap(const QualityMap& map, const std::filesystem::path& path) {
    if (map.values.size() != map.height * map.width) {
        throw DimensionError("quality map data does not match its dimensions");
    }
    GrayImage img{map.height, map.width, {}};
    img.pixels.reserve(map.values.size());
    for (float v : map.values) {
        if (!std::isfinite(v)) throw DegenerateInputError("heatmap contains a non-finite value");
        img.pixels.push_back(heatmap_level(v));
    }
    write_gray_png(img, path);
}

namespace {

struct PngWriteDeleter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteDeleter() { png_destroy_write_struct(&png, &info); }
};

struct PngReadDeleter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadDeleter() { png_destroy_read_struct(&png, &info, nullptr); }
};

void append_to_vector(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

void no_flush(png_structp) {}

struct ReadCursor {
    const std::vector<std::uint8_t>* bytes;
    std::size_t pos;
};

void read_from_vector(png_structp png, png_bytep data, png_size_t len) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->pos + len > cur->bytes->size()) png_error(png, "unexpected end of PNG data");
    std::copy_n(cur->bytes->data() + cur->pos, len, data);
    cur->pos += len;
}

void png_warn(png_structp, png_const_charp) {}

}  // namespace

void write_gray_png(const GrayImage& image, const std::filesystem::path& path) {
    if (image.height == 0 || image.width == 0 || image.pixels.size() != image.height * image.width) {
        throw DimensionError("grayscale image data does not match its dimensions");
    }
    std::vector<std::uint8_t> encoded;
    PngWriteDeleter h;
    h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
    if (h.png) h.info = png_create_info_struct(h.png);
    if (!h.png || !h.info) throw TensorIoError(TensorIoError::Code::Io, "cannot allocate PNG writer");
    if (setjmp(png_jmpbuf(h.png))) {
        throw TensorIoError(TensorIoError::Code::Io, "PNG encoding failed for " + describe(path));
    }
    png_set_write_fn(h.png, &encoded, append_to_vector, no_flush);
    // Fixed filter and compression settings keep output byte-stable.
    png_set_filter(h.png, 0, PNG_FILTER_NONE);
    png_set_compression_level(h.png, 9);
    png_set_IHDR(h.png, h.info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(h.png, h.info);
    for (std::size_t y = 0; y < image.height; ++y) {
        png_write_row(h.png, image.pixels.data() + y * image.width);
    }
    png_write_end(h.png, nullptr);
    write_file_atomic(path, encoded);
}

GrayImage read_gray_png(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    GrayImage img;
    ReadCursor cur{&bytes, 0};
    PngReadDeleter h;
    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
    if (h.png) h.info = png_create_info_struct(h.png);
    if (!h.png || !h.info) throw TensorIoError(TensorIoError::Code::Io, "cannot allocate PNG reader");
    if (setjmp(png_jmpbuf(h.png))) {
        throw TensorIoError(TensorIoError::Code::BadHeader, describe(path) + ": malformed PNG");
    }
    png_set_read_fn(h.png, &cur, read_from_vector);
    png_read_info(h.png, h.info);
    if (png_get_color_type(h.png, h.info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(h.png, h.info) != 8) {
        throw TensorIoError(TensorIoError::Code::BadHeader, describe(path) + ": not an 8-bit grayscale PNG");
    }
    img.width = png_get_image_width(h.png, h.info);
    img.height = png_get_image_height(h.png, h.info);
    img.pixels.resize(img.width * img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        png_read_row(h.png, img.pixels.data() + y * img.width, nullptr);
    }
    return img;
}

}  // namespace qualmap
