#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace clir {

/// Dense row-major matrix of doubles. All values are expected to stay
/// finite; the only sanctioned exception is the +inf masking sentinel
/// used by the alignment search.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  bool all_finite() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Per-token output embeddings: one row per token.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(Matrix m, bool normalized) : mat_(std::move(m)), normalized_(normalized) {}

  /// Row-normalizes `m` and tags the result as normalized. Throws ZeroRow
  /// on degenerate rows.
  static EmbeddingMatrix normalized_from(const Matrix& m);

  std::size_t tokens() const { return mat_.rows(); }
  std::size_t dim() const { return mat_.cols(); }
  bool normalized() const { return normalized_; }

  const Matrix& matrix() const { return mat_; }
  std::span<const double> row(std::size_t r) const { return mat_.row(r); }

 private:
  Matrix mat_;
  bool normalized_ = false;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Scales each row to unit L2 norm. Throws ZeroRow if a row's norm is
/// below 1e-12.
Matrix normalize_rows(const Matrix& m);

/// 1 - cos(a_i, b_j) for one row pair, clamped into [0, 2]. Shared by the
/// distance matrix and the alignment reference oracle so both see
/// identical values.
double row_cosine_distance(std::span<const double> a, std::span<const double> b);

/// Pairwise cosine-distance matrix of shape a.tokens x b.tokens.
Matrix cosine_distance_matrix(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

/// softmax(scores / tau) with max-subtraction stabilization.
std::vector<double> softmax_with_temperature(std::span<const double> scores, double tau);

}  // namespace clir
