#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clir/matrix.hpp"

namespace clir {

/// Trainable toy encoder: vocabulary embedding table followed by a linear
/// compression layer and per-token L2 normalization. Context-free by
/// design; it stands in for a transformer encoder while exercising the
/// same loss and gradient paths.
struct EncoderParams {
  std::size_t vocab_size = 0;
  std::size_t hidden = 0;
  std::size_t out_dim = 0;
  Matrix embed_table;  // vocab_size x hidden
  Matrix projection;   // hidden x out_dim
  std::string lineage; // free-form seed/stage provenance, stored in checkpoints
};

/// Gaussian init scaled by 1/sqrt(fan-in).
EncoderParams init_encoder(std::uint64_t seed, std::size_t vocab_size, std::size_t hidden,
                           std::size_t out_dim);

/// Re-initializes the embedding row of each pair's second token as a noisy
/// copy of the first token's row: second = (first + sigma*g) / sqrt(1+sigma^2).
/// This models a multilingually pretrained starting point, where token
/// pairs that translate each other start out correlated.
void tie_token_rows(EncoderParams& params, const std::vector<std::pair<int, int>>& pairs,
                    double noise_sigma, std::uint64_t seed);

/// Encodes a token sequence: row t = normalize(embed_table[token_t] * projection).
/// Sequences longer than max_tokens are truncated (0 = no limit).
EmbeddingMatrix encode(std::span<const int> tokens, const EncoderParams& params,
                       std::size_t max_tokens = 0);

struct EncoderGrads {
  Matrix embed_table;  // same shape as params.embed_table
  Matrix projection;   // same shape as params.projection

  void accumulate(const EncoderGrads& other, double scale = 1.0);
  void scale(double factor);
};

EncoderGrads zero_grads(const EncoderParams& params);

/// Exact backward pass through projection and row normalization
/// ((I - y y^T)/||x|| Jacobian), accumulating into embedding rows of the
/// tokens used. grad_embeddings must match the shape encode() produced
/// for the same (tokens, max_tokens).
EncoderGrads encode_backward(std::span<const int> tokens, const EncoderParams& params,
                             const Matrix& grad_embeddings, std::size_t max_tokens = 0);

/// Applies one SGD step: params -= learning_rate * grads.
void sgd_step(EncoderParams& params, const EncoderGrads& grads, double learning_rate);

/// FNV-1a over shapes and parameter bytes. Identifies the encoder that
/// built an index.
std::uint64_t fingerprint(const EncoderParams& params);

/// Versioned binary checkpoint, bit-exact round trip.
void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

}  // namespace clir
