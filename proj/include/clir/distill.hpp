#pragma once

#include <cstddef>
#include <vector>

#include "clir/align.hpp"
#include "clir/matrix.hpp"

namespace clir {

struct ScorePair {
  double pos = 0.0;
  double neg = 0.0;
};

/// Relevance-score distillation input: per-triple (s_pos, s_neg) from the
/// teacher and the student, plus the softmax temperature.
struct KDRelevanceBatch {
  std::vector<ScorePair> teacher_scores;
  std::vector<ScorePair> student_scores;
  double tau = 1.0;
};

struct KDRelevanceResult {
  double loss = 0.0;
  /// d(loss)/d(student scores), per triple. Includes the 1/batch factor of
  /// the mean, so the values match finite differences of `loss` directly.
  std::vector<ScorePair> grads;
};

/// Temperature-scaled KL divergence of the student's softmax from the
/// teacher's, averaged over triples. Each triple contributes
/// tau^2 * KL(softmax(teacher/tau) || softmax(student/tau)); the tau^2
/// factor keeps gradient magnitude temperature-independent.
KDRelevanceResult kd_relevance_loss(const KDRelevanceBatch& batch);

/// Representation distillation input: student embeddings and the
/// (constant) aligned teacher embeddings, compared at matched positions.
struct KDReprBatch {
  EmbeddingMatrix student;
  EmbeddingMatrix teacher_aligned;
  std::vector<std::size_t> matched_positions;
};

struct KDReprResult {
  double loss = 0.0;
  Matrix grad_student;
};

/// Mean squared error over matched positions and dimensions. No gradient
/// flows to the teacher side.
KDReprResult kd_repr_loss(const KDReprBatch& batch);

enum class PairKind {
  cross_lingual,     // teacher reordered via greedy alignment
  english_identity,  // teacher used as-is, identity alignment
};

/// Builds a representation-distillation batch. cross_lingual runs
/// greedy_align + apply_alignment and takes the matched positions from
/// the plan; english_identity matches positions 0..min(L_T, L_S)-1
/// against the unreordered teacher.
KDReprBatch make_repr_batch(PairKind kind, const EmbeddingMatrix& teacher,
                            const EmbeddingMatrix& student);

}  // namespace clir
