#include "clir/align.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "clir/error.hpp"

namespace clir {

AlignmentPlan greedy_align(const EmbeddingMatrix& teacher, const EmbeddingMatrix& student) {
  const std::size_t t_rows = teacher.tokens();
  const std::size_t s_rows = student.tokens();
  if (t_rows == 0 || s_rows == 0)
    throw Error(ErrorCode::EmptyInput, "alignment over an empty embedding matrix");

  const Matrix base = cosine_distance_matrix(teacher, student);  // checks dims
  const std::size_t rows = std::max(t_rows, s_rows);
  const double inf = std::numeric_limits<double>::infinity();

  // Working copy, padded with +inf rows when the student side is longer.
  Matrix dm(rows, s_rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < s_rows; ++j) dm(i, j) = i < t_rows ? base(i, j) : inf;

  // arrangement[p] = teacher row currently occupying position p
  std::vector<std::size_t> arrangement(rows);
  for (std::size_t p = 0; p < rows; ++p) arrangement[p] = p;

  AlignmentPlan plan;
  plan.teacher_tokens = t_rows;
  plan.student_tokens = s_rows;

  const std::size_t iterations = std::min(t_rows, s_rows);
  for (std::size_t k = 0; k < iterations; ++k) {
    bool found = false;
    std::size_t best_i = 0, best_j = 0;
    double best = inf;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < s_rows; ++j) {
        double v = dm(i, j);
        if (!std::isfinite(v)) continue;  // +inf sentinel: masked or padding
        if (!found || v < best) {
          found = true;
          best = v;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (!found)
      throw Error(ErrorCode::EmptyInput, "distance matrix exhausted before min(|v_T|,|v_S|) matches");

    // Swap rows best_i and best_j, then mask row best_j and column best_j.
    // The swap happens first, so the row displaced into best_i stays matchable.
    if (best_i != best_j) {
      auto a = dm.row(best_i);
      auto b = dm.row(best_j);
      std::swap_ranges(a.begin(), a.end(), b.begin());
      std::swap(arrangement[best_i], arrangement[best_j]);
    }
    for (std::size_t j = 0; j < s_rows; ++j) dm(best_j, j) = inf;
    for (std::size_t i = 0; i < rows; ++i) dm(i, best_j) = inf;

    plan.swaps.emplace_back(best_i, best_j);
    plan.matched_positions.push_back(best_j);
    plan.matched_distance.push_back(best);
  }

  plan.permutation.resize(rows);
  for (std::size_t p = 0; p < rows; ++p)
    plan.permutation[p] = arrangement[p] < t_rows ? arrangement[p] : kNoTeacherRow;
  return plan;
}

EmbeddingMatrix apply_alignment(const EmbeddingMatrix& teacher, const AlignmentPlan& plan) {
  if (teacher.tokens() != plan.teacher_tokens)
    throw Error(ErrorCode::PlanMismatch,
                "plan built for " + std::to_string(plan.teacher_tokens) + " teacher rows, got " +
                    std::to_string(teacher.tokens()));
  const std::size_t rows = plan.output_rows();
  Matrix out(rows, teacher.dim());
  for (std::size_t r = 0; r < teacher.tokens(); ++r)
    std::copy(teacher.row(r).begin(), teacher.row(r).end(), out.row(r).begin());

  for (const auto& [i, j] : plan.swaps) {
    if (i >= rows || j >= rows)
      throw Error(ErrorCode::PlanMismatch, "swap index out of range");
    if (i == j) continue;
    auto a = out.row(i);
    auto b = out.row(j);
    std::swap_ranges(a.begin(), a.end(), b.begin());
  }
  bool normalized = teacher.normalized() && rows == teacher.tokens();
  return EmbeddingMatrix(std::move(out), normalized);
}

AlignmentPlan reference_align(const EmbeddingMatrix& teacher, const EmbeddingMatrix& student) {
  const std::size_t t_rows = teacher.tokens();
  const std::size_t s_rows = student.tokens();
  if (t_rows == 0 || s_rows == 0)
    throw Error(ErrorCode::EmptyInput, "alignment over an empty embedding matrix");
  if (teacher.dim() != student.dim())
    throw Error(ErrorCode::DimMismatch, "embedding dims differ");

  // position_of[r] = position teacher row r currently occupies; rows are
  // displaced only when a match lands on the position they sit at.
  std::vector<std::size_t> position_of(t_rows);
  for (std::size_t r = 0; r < t_rows; ++r) position_of[r] = r;
  std::vector<bool> row_done(t_rows, false), col_done(s_rows, false);

  AlignmentPlan plan;
  plan.teacher_tokens = t_rows;
  plan.student_tokens = s_rows;

  const std::size_t iterations = std::min(t_rows, s_rows);
  for (std::size_t k = 0; k < iterations; ++k) {
    bool found = false;
    std::size_t best_r = 0, best_c = 0, best_pos = 0;
    double best = 0.0;
    for (std::size_t r = 0; r < t_rows; ++r) {
      if (row_done[r]) continue;
      for (std::size_t c = 0; c < s_rows; ++c) {
        if (col_done[c]) continue;
        double d = row_cosine_distance(teacher.row(r), student.row(c));
        bool better = !found || d < best ||
                      (d == best && (position_of[r] < best_pos ||
                                     (position_of[r] == best_pos && c < best_c)));
        if (better) {
          found = true;
          best = d;
          best_r = r;
          best_c = c;
          best_pos = position_of[r];
        }
      }
    }

    // The row sitting at the matched position is displaced to the winner's
    // old position, mirroring the row swap of the in-place algorithm.
    std::size_t winner_pos = position_of[best_r];
    for (std::size_t u = 0; u < t_rows; ++u) {
      if (u != best_r && !row_done[u] && position_of[u] == best_c) {
        position_of[u] = winner_pos;
        break;
      }
    }
    position_of[best_r] = best_c;
    row_done[best_r] = true;
    col_done[best_c] = true;

    plan.swaps.emplace_back(winner_pos, best_c);
    plan.matched_positions.push_back(best_c);
    plan.matched_distance.push_back(best);
  }

  plan.permutation.assign(plan.output_rows(), kNoTeacherRow);
  for (std::size_t r = 0; r < t_rows; ++r) plan.permutation[position_of[r]] = r;
  return plan;
}

}  // namespace clir
