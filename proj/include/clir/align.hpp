#pragma once

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "clir/matrix.hpp"

namespace clir {

/// Marks an output position holding no real teacher row (only possible
/// when the student side is longer than the teacher side).
inline constexpr std::size_t kNoTeacherRow = std::numeric_limits<std::size_t>::max();

/// Result of the greedy cross-lingual alignment: the executed row swaps,
/// the student positions they consumed, and the induced permutation.
struct AlignmentPlan {
  std::size_t teacher_tokens = 0;
  std::size_t student_tokens = 0;

  /// Row-swap pairs (i, j) in execution order.
  std::vector<std::pair<std::size_t, std::size_t>> swaps;

  /// Student positions consumed, in match order. Each appears once.
  std::vector<std::size_t> matched_positions;

  /// Distance of each match, parallel to matched_positions.
  std::vector<double> matched_distance;

  /// permutation[p] = teacher row occupying output position p after all
  /// swaps, or kNoTeacherRow. Length max(teacher_tokens, student_tokens).
  std::vector<std::size_t> permutation;

  std::size_t output_rows() const {
    return teacher_tokens > student_tokens ? teacher_tokens : student_tokens;
  }
};

/// Greedy token alignment. Builds the cosine-distance matrix between
/// teacher and student embeddings and iterates min(|v_T|, |v_S|) times:
/// take the global minimum entry (i, j) (ties: smallest i, then smallest
/// j), swap rows i and j, then mask row j and column j with +inf. The
/// masked +inf entries are excluded from later min searches.
///
/// When the student side is longer, the distance matrix is padded with
/// +inf rows so every column index is also a valid row index; the padded
/// rows can never win a match.
AlignmentPlan greedy_align(const EmbeddingMatrix& teacher, const EmbeddingMatrix& student);

/// Replays the plan's swaps on the teacher matrix, returning the
/// reordered embeddings. Row j of the output holds the teacher row
/// aligned to student position j, for every matched j. When the plan's
/// student side is longer the output is padded with zero rows before
/// swapping; padded and unmatched rows land wherever the swap sequence
/// leaves them.
EmbeddingMatrix apply_alignment(const EmbeddingMatrix& teacher, const AlignmentPlan& plan);

/// Independent oracle for greedy_align: repeatedly scans all unconsumed
/// (teacher row, student position) pairs for the minimum distance,
/// recomputing distances on demand and tracking row displacement
/// symbolically instead of mutating a matrix. Must produce the same
/// permutation as greedy_align.
AlignmentPlan reference_align(const EmbeddingMatrix& teacher, const EmbeddingMatrix& student);

}  // namespace clir
