#pragma once
// Value-value self-attention and the cosine similarity shared by both quality maps.
//
// A token matrix holds the global (class) token in row 0 and L spatial patch
// tokens in rows 1..L, laid out row-major over a sqrt(L) x sqrt(L) grid.

#include <cstddef>
#include <span>
#include <vector>

#include "qualmap/tensor_io.hpp"

namespace qualmap {

using TokenMatrix = EmbeddingTensor;

// Temperature used to scale the V.V^T logits.
enum class AttentionNorm {
    Frobenius,  // one scale for the whole matrix: 1 / ||V||_F
    PerRowL2,   // row i of the logits scaled by 1 / ||V[i]||_2
};

// softmax(V V^T / ||V||) V, softmax taken row-wise.
EmbeddingTensor vvv_attention(const EmbeddingTensor& values,
                              AttentionNorm norm = AttentionNorm::Frobenius);

// The row-stochastic weight matrix used inside vvv_attention (rows x rows).
std::vector<double> vvv_attention_weights(const EmbeddingTensor& values,
                                          AttentionNorm norm = AttentionNorm::Frobenius);

// Cosine similarity of every token row against `direction`.
std::vector<double> cosine_logits(const TokenMatrix& tokens, std::span<const float> direction);
std::vector<double> cosine_logits(const TokenMatrix& tokens, std::span<const double> direction);

double cosine(std::span<const float> a, std::span<const float> b);

// Side length of the spatial grid; throws unless rows = 1 + L with L a perfect square.
std::size_t grid_side(const TokenMatrix& tokens);

}  // namespace qualmap
