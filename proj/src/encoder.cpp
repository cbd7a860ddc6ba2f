#include "clir/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "clir/error.hpp"
#include "clir/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace clir {

EncoderParams init_encoder(std::uint64_t seed, std::size_t vocab_size, std::size_t hidden,
                           std::size_t out_dim) {
  if (vocab_size == 0 || hidden == 0 || out_dim == 0)
    throw Error(ErrorCode::InvalidSpec, "encoder shapes must be positive");
  EncoderParams params;
  params.vocab_size = vocab_size;
  params.hidden = hidden;
  params.out_dim = out_dim;
  params.embed_table = Matrix(vocab_size, hidden);
  params.projection = Matrix(hidden, out_dim);
  params.lineage = "init:seed=" + std::to_string(seed);

  Rng rng(seed);
  double embed_scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& v : params.embed_table.values()) v = rng.gauss() * embed_scale;
  double proj_scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& v : params.projection.values()) v = rng.gauss() * proj_scale;
  return params;
}

void tie_token_rows(EncoderParams& params, const std::vector<std::pair<int, int>>& pairs,
                    double noise_sigma, std::uint64_t seed) {
  Rng rng(seed);
  double scale = 1.0 / std::sqrt(1.0 + noise_sigma * noise_sigma);
  for (auto [src, dst] : pairs) {
    if (src < 0 || dst < 0 || static_cast<std::size_t>(src) >= params.vocab_size ||
        static_cast<std::size_t>(dst) >= params.vocab_size)
      throw Error(ErrorCode::InvalidSpec, "tie pair token id out of vocabulary range");
    auto from = params.embed_table.row(static_cast<std::size_t>(src));
    auto to = params.embed_table.row(static_cast<std::size_t>(dst));
    for (std::size_t c = 0; c < params.hidden; ++c)
      to[c] = (from[c] + noise_sigma * rng.gauss()) * scale;
  }
  params.lineage += "+tie:sigma=" + std::to_string(noise_sigma) + ",seed=" + std::to_string(seed);
}

namespace {

constexpr double kZeroRowNorm = 1e-12;

std::size_t effective_length(std::size_t len, std::size_t max_tokens) {
  return max_tokens > 0 && len > max_tokens ? max_tokens : len;
}

void check_tokens(std::span<const int> tokens, const EncoderParams& params) {
  if (tokens.empty()) throw Error(ErrorCode::EmptyInput, "empty token sequence");
  for (int t : tokens)
    if (t < 0 || static_cast<std::size_t>(t) >= params.vocab_size)
      throw Error(ErrorCode::InvalidSpec,
                  "token id " + std::to_string(t) + " outside vocabulary of " +
                      std::to_string(params.vocab_size));
}

}  // namespace

EmbeddingMatrix encode(std::span<const int> tokens, const EncoderParams& params,
                       std::size_t max_tokens) {
  check_tokens(tokens, params);
  const std::size_t len = effective_length(tokens.size(), max_tokens);
  const std::size_t hidden = params.hidden;
  const std::size_t dim = params.out_dim;

  Matrix out(len, dim);
  for (std::size_t t = 0; t < len; ++t) {
    auto e = params.embed_table.row(static_cast<std::size_t>(tokens[t]));
    auto y = out.row(t);
    for (std::size_t h = 0; h < hidden; ++h) {
      double ev = e[h];
      auto w = params.projection.row(h);
      for (std::size_t c = 0; c < dim; ++c) y[c] += ev * w[c];
    }
    double norm = l2_norm(y);
    if (norm < kZeroRowNorm)
      throw Error(ErrorCode::ZeroRow, "token at position " + std::to_string(t) +
                                          " projects to a near-zero vector");
    for (std::size_t c = 0; c < dim; ++c) y[c] /= norm;
  }
  return EmbeddingMatrix(std::move(out), true);
}

EncoderGrads zero_grads(const EncoderParams& params) {
  EncoderGrads g;
  g.embed_table = Matrix(params.vocab_size, params.hidden);
  g.projection = Matrix(params.hidden, params.out_dim);
  return g;
}

void EncoderGrads::accumulate(const EncoderGrads& other, double scale) {
  auto dst_e = embed_table.values();
  auto src_e = other.embed_table.values();
  for (std::size_t i = 0; i < dst_e.size(); ++i) dst_e[i] += scale * src_e[i];
  auto dst_p = projection.values();
  auto src_p = other.projection.values();
  for (std::size_t i = 0; i < dst_p.size(); ++i) dst_p[i] += scale * src_p[i];
}

void EncoderGrads::scale(double factor) {
  for (double& v : embed_table.values()) v *= factor;
  for (double& v : projection.values()) v *= factor;
}

EncoderGrads encode_backward(std::span<const int> tokens, const EncoderParams& params,
                             const Matrix& grad_embeddings, std::size_t max_tokens) {
  check_tokens(tokens, params);
  const std::size_t len = effective_length(tokens.size(), max_tokens);
  const std::size_t hidden = params.hidden;
  const std::size_t dim = params.out_dim;
  if (grad_embeddings.rows() != len || grad_embeddings.cols() != dim)
    throw Error(ErrorCode::ShapeMismatch,
                "upstream gradient is " + std::to_string(grad_embeddings.rows()) + "x" +
                    std::to_string(grad_embeddings.cols()) + ", expected " +
                    std::to_string(len) + "x" + std::to_string(dim));

  EncoderGrads grads = zero_grads(params);
  std::vector<double> x(dim), gx(dim);
  for (std::size_t t = 0; t < len; ++t) {
    auto idx = static_cast<std::size_t>(tokens[t]);
    auto e = params.embed_table.row(idx);

    // Recompute the pre-normalization projection x = e * W.
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t h = 0; h < hidden; ++h) {
      double ev = e[h];
      auto w = params.projection.row(h);
      for (std::size_t c = 0; c < dim; ++c) x[c] += ev * w[c];
    }
    double norm = l2_norm(x);
    if (norm < kZeroRowNorm)
      throw Error(ErrorCode::ZeroRow, "token at position " + std::to_string(t) +
                                          " projects to a near-zero vector");

    // Normalization Jacobian: gx = (g - (g . y) y) / ||x||, with y = x/||x||.
    auto g = grad_embeddings.row(t);
    double g_dot_y = 0.0;
    for (std::size_t c = 0; c < dim; ++c) g_dot_y += g[c] * x[c] / norm;
    for (std::size_t c = 0; c < dim; ++c) gx[c] = (g[c] - g_dot_y * x[c] / norm) / norm;

    // x = e * W: dW += e^T gx, de += gx W^T.
    auto ge = grads.embed_table.row(idx);
    for (std::size_t h = 0; h < hidden; ++h) {
      auto w = params.projection.row(h);
      auto gw = grads.projection.row(h);
      double ev = e[h];
      double acc = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        gw[c] += ev * gx[c];
        acc += gx[c] * w[c];
      }
      ge[h] += acc;
    }
  }
  return grads;
}

void sgd_step(EncoderParams& params, const EncoderGrads& grads, double learning_rate) {
  if (grads.embed_table.rows() != params.embed_table.rows() ||
      grads.embed_table.cols() != params.embed_table.cols() ||
      grads.projection.rows() != params.projection.rows() ||
      grads.projection.cols() != params.projection.cols())
    throw Error(ErrorCode::ShapeMismatch, "gradient shapes do not match parameters");
  auto pe = params.embed_table.values();
  auto ge = grads.embed_table.values();
  for (std::size_t i = 0; i < pe.size(); ++i) pe[i] -= learning_rate * ge[i];
  auto pp = params.projection.values();
  auto gp = grads.projection.values();
  for (std::size_t i = 0; i < pp.size(); ++i) pp[i] -= learning_rate * gp[i];
}

std::uint64_t fingerprint(const EncoderParams& params) {
  std::uint64_t h = fnv1a64(&params.vocab_size, sizeof(params.vocab_size));
  h = fnv1a64(&params.hidden, sizeof(params.hidden), h);
  h = fnv1a64(&params.out_dim, sizeof(params.out_dim), h);
  auto e = params.embed_table.values();
  h = fnv1a64(e.data(), e.size() * sizeof(double), h);
  auto p = params.projection.values();
  h = fnv1a64(p.data(), p.size() * sizeof(double), h);
  return h;
}

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'L', 'I', 'R', 'C', 'K', 'P', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  std::uint32_t version = 1;
  write_pod(out, version);
  std::uint64_t v = params.vocab_size, h = params.hidden, d = params.out_dim;
  write_pod(out, v);
  write_pod(out, h);
  write_pod(out, d);
  std::uint64_t lineage_len = params.lineage.size();
  write_pod(out, lineage_len);
  out.write(params.lineage.data(), static_cast<std::streamsize>(lineage_len));
  auto e = params.embed_table.values();
  out.write(reinterpret_cast<const char*>(e.data()),
            static_cast<std::streamsize>(e.size() * sizeof(double)));
  auto p = params.projection.values();
  out.write(reinterpret_cast<const char*>(p.data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
  std::uint64_t fp = fingerprint(params);
  write_pod(out, fp);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw Error(ErrorCode::ParseError, path + " is not a checkpoint file");
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != 1)
    throw Error(ErrorCode::ParseError, "unsupported checkpoint version " + std::to_string(version));

  EncoderParams params;
  std::uint64_t v = 0, h = 0, d = 0, lineage_len = 0;
  read_pod(in, v);
  read_pod(in, h);
  read_pod(in, d);
  read_pod(in, lineage_len);
  if (!in || v == 0 || h == 0 || d == 0)
    throw Error(ErrorCode::ParseError, "corrupt checkpoint header in " + path);
  params.vocab_size = v;
  params.hidden = h;
  params.out_dim = d;
  params.lineage.resize(lineage_len);
  in.read(params.lineage.data(), static_cast<std::streamsize>(lineage_len));
  params.embed_table = Matrix(v, h);
  params.projection = Matrix(h, d);
  auto e = params.embed_table.values();
  in.read(reinterpret_cast<char*>(e.data()),
          static_cast<std::streamsize>(e.size() * sizeof(double)));
  auto p = params.projection.values();
  in.read(reinterpret_cast<char*>(p.data()),
          static_cast<std::streamsize>(p.size() * sizeof(double)));
  std::uint64_t stored_fp = 0;
  read_pod(in, stored_fp);
  if (!in) throw Error(ErrorCode::ParseError, "truncated checkpoint " + path);
  if (stored_fp != fingerprint(params))
    throw Error(ErrorCode::ParseError, "checkpoint hash mismatch in " + path);
  return params;
}

}  // namespace clir
