#include "qualmap/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qualmap/error.hpp"

namespace qualmap {

namespace {

template <typename T>
double norm2(std::span<const T> v) {
    double s = 0.0;
    for (T x : v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

template <typename A, typename B>
double dot(std::span<const A> a, std::span<const B> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

template <typename T>
std::vector<double> cosine_impl(const TokenMatrix& tokens, std::span<const T> direction) {
    if (direction.size() != tokens.cols()) {
        throw DimensionError("direction has dim " + std::to_string(direction.size()) +
                             ", tokens have dim " + std::to_string(tokens.cols()));
    }
    const double dn = norm2(direction);
    if (!(dn > 0.0)) throw DegenerateInputError("zero-norm direction in cosine similarity");
    std::vector<double> out(tokens.rows());
    for (std::size_t k = 0; k < tokens.rows(); ++k) {
        const auto row = tokens.row(k);
        const double tn = norm2(row);
        if (!(tn > 0.0)) {
            throw DegenerateInputError("token " + std::to_string(k) + " has zero norm");
        }
        out[k] = std::clamp(dot(row, direction) / (tn * dn), -1.0, 1.0);
    }
    return out;
}

}  // namespace

std::vector<double> vvv_attention_weights(const EmbeddingTensor& values, AttentionNorm norm) {
    const std::size_t n = values.rows();
    if (n == 0 || values.cols() == 0) throw DimensionError("value matrix is empty");

    std::vector<double> scale(n);
    if (norm == AttentionNorm::Frobenius) {
        const double f = norm2(std::span<const float>(values.data()));
        if (!(f > 0.0)) throw DegenerateInputError("value matrix has zero Frobenius norm");
        std::fill(scale.begin(), scale.end(), 1.0 / f);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double r = norm2(values.row(i));
            if (!(r > 0.0)) throw DegenerateInputError("value row " + std::to_string(i) + " has zero norm");
            scale[i] = 1.0 / r;
        }
    }

    std::vector<double> w(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        double* wi = w.data() + i * n;
        double peak = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) {
            wi[j] = dot(values.row(i), values.row(j)) * scale[i];
            peak = std::max(peak, wi[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            wi[j] = std::exp(wi[j] - peak);
            total += wi[j];
        }
        for (std::size_t j = 0; j < n; ++j) wi[j] /= total;
    }
    return w;
}

EmbeddingTensor vvv_attention(const EmbeddingTensor& values, AttentionNorm norm) {
    const std::size_t n = values.rows();
    const std::size_t d = values.cols();
    const auto w = vvv_attention_weights(values, norm);
    EmbeddingTensor out(n, d);
    std::vector<double> acc(d);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double wij = w[i * n + j];
            const auto vj = values.row(j);
            for (std::size_t c = 0; c < d; ++c) acc[c] += wij * static_cast<double>(vj[c]);
        }
        auto oi = out.row(i);
        for (std::size_t c = 0; c < d; ++c) oi[c] = static_cast<float>(acc[c]);
    }
    return out;
}

std::vector<double> cosine_logits(const TokenMatrix& tokens, std::span<const float> direction) {
    return cosine_impl(tokens, direction);
}

std::vector<double> cosine_logits(const TokenMatrix& tokens, std::span<const double> direction) {
    return cosine_impl(tokens, direction);
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw DimensionError("cosine of vectors with different dims");
    const double na = norm2(a);
    const double nb = norm2(b);
    if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateInputError("zero-norm vector in cosine similarity");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::size_t grid_side(const TokenMatrix& tokens) {
    if (tokens.rows() < 2) {
        throw DimensionError("token matrix needs a global token and at least one spatial token");
    }
    const std::size_t spatial = tokens.rows() - 1;
    auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(spatial))));
    if (side * side != spatial) {
        throw DimensionError(std::to_string(spatial) + " spatial tokens do not form a square grid");
    }
    return side;
}

}  // namespace qualmap
