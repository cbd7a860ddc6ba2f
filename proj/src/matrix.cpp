#include "clir/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "clir/error.hpp"

namespace clir {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::TraceMismatch: return "TraceMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::PlanMismatch: return "PlanMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyMatchSet: return "EmptyMatchSet";
    case ErrorCode::MissingTeacher: return "MissingTeacher";
    case ErrorCode::DataKindMismatch: return "DataKindMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

EmbeddingMatrix EmbeddingMatrix::normalized_from(const Matrix& m) {
  return EmbeddingMatrix(normalize_rows(m), true);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

namespace {
constexpr double kZeroRowNorm = 1e-12;
}

Matrix normalize_rows(const Matrix& m) {
  if (m.rows() == 0) throw Error(ErrorCode::EmptyInput, "matrix has no rows");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double norm = l2_norm(m.row(r));
    if (norm < kZeroRowNorm)
      throw Error(ErrorCode::ZeroRow, "row " + std::to_string(r) + " has near-zero norm");
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c) / norm;
  }
  return out;
}

double row_cosine_distance(std::span<const double> a, std::span<const double> b) {
  double na = l2_norm(a);
  double nb = l2_norm(b);
  if (na < kZeroRowNorm || nb < kZeroRowNorm)
    throw Error(ErrorCode::ZeroRow, "cosine distance of a near-zero row");
  double d = 1.0 - dot(a, b) / (na * nb);
  if (d < 0.0) d = 0.0;
  if (d > 2.0) d = 2.0;
  return d;
}

Matrix cosine_distance_matrix(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.dim() != b.dim())
    throw Error(ErrorCode::DimMismatch, "embedding dims " + std::to_string(a.dim()) +
                                            " vs " + std::to_string(b.dim()));
  Matrix out(a.tokens(), b.tokens());
  for (std::size_t i = 0; i < a.tokens(); ++i)
    for (std::size_t j = 0; j < b.tokens(); ++j)
      out(i, j) = row_cosine_distance(a.row(i), b.row(j));
  return out;
}

std::vector<double> softmax_with_temperature(std::span<const double> scores, double tau) {
  if (!(tau > 0.0))
    throw Error(ErrorCode::NonPositiveTemperature, "tau = " + std::to_string(tau));
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "empty score list");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error(ErrorCode::EmptyInput, "non-finite score");

  double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - m) / tau);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

}  // namespace clir
