#include "clir/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "clir/error.hpp"

namespace clir {

namespace {

// log softmax([pos, neg] / tau), stabilized.
void log_softmax_pair(double pos, double neg, double tau, double out[2]) {
  double a = pos / tau, b = neg / tau;
  double m = std::max(a, b);
  double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
  out[0] = a - lse;
  out[1] = b - lse;
}

}  // namespace

KDRelevanceResult kd_relevance_loss(const KDRelevanceBatch& batch) {
  if (!(batch.tau > 0.0))
    throw Error(ErrorCode::NonPositiveTemperature, "tau = " + std::to_string(batch.tau));
  if (batch.teacher_scores.size() != batch.student_scores.size())
    throw Error(ErrorCode::LengthMismatch,
                "teacher has " + std::to_string(batch.teacher_scores.size()) +
                    " triples, student has " + std::to_string(batch.student_scores.size()));
  if (batch.teacher_scores.empty())
    throw Error(ErrorCode::EmptyInput, "empty relevance batch");

  const double tau = batch.tau;
  const std::size_t n = batch.teacher_scores.size();
  KDRelevanceResult result;
  result.grads.resize(n);

  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double log_p[2], log_q[2];
    log_softmax_pair(batch.teacher_scores[t].pos, batch.teacher_scores[t].neg, tau, log_p);
    log_softmax_pair(batch.student_scores[t].pos, batch.student_scores[t].neg, tau, log_q);
    double p[2] = {std::exp(log_p[0]), std::exp(log_p[1])};
    double q[2] = {std::exp(log_q[0]), std::exp(log_q[1])};

    double kl = p[0] * (log_p[0] - log_q[0]) + p[1] * (log_p[1] - log_q[1]);
    total += tau * tau * kl;

    // d(tau^2 KL)/d s_k = tau (q_k - p_k); the mean adds the 1/n.
    result.grads[t].pos = tau * (q[0] - p[0]) / static_cast<double>(n);
    result.grads[t].neg = tau * (q[1] - p[1]) / static_cast<double>(n);
  }
  result.loss = total / static_cast<double>(n);
  return result;
}

KDReprResult kd_repr_loss(const KDReprBatch& batch) {
  if (batch.student.dim() != batch.teacher_aligned.dim())
    throw Error(ErrorCode::DimMismatch, "student/teacher embedding dims differ");
  if (batch.matched_positions.empty())
    throw Error(ErrorCode::EmptyMatchSet, "no matched positions");
  for (std::size_t j : batch.matched_positions)
    if (j >= batch.student.tokens() || j >= batch.teacher_aligned.tokens())
      throw Error(ErrorCode::DimMismatch,
                  "matched position " + std::to_string(j) + " out of range");

  const std::size_t dim = batch.student.dim();
  const double denom = static_cast<double>(batch.matched_positions.size() * dim);

  KDReprResult result;
  result.grad_student = Matrix(batch.student.tokens(), dim);
  double total = 0.0;
  for (std::size_t j : batch.matched_positions) {
    auto s = batch.student.row(j);
    auto t = batch.teacher_aligned.row(j);
    for (std::size_t c = 0; c < dim; ++c) {
      double diff = s[c] - t[c];
      total += diff * diff;
      result.grad_student(j, c) = 2.0 * diff / denom;
    }
  }
  result.loss = total / denom;
  return result;
}

KDReprBatch make_repr_batch(PairKind kind, const EmbeddingMatrix& teacher,
                            const EmbeddingMatrix& student) {
  if (teacher.dim() != student.dim())
    throw Error(ErrorCode::DimMismatch, "student/teacher embedding dims differ");

  KDReprBatch batch;
  batch.student = student;
  if (kind == PairKind::english_identity) {
    batch.teacher_aligned = teacher;
    std::size_t matched = std::min(teacher.tokens(), student.tokens());
    batch.matched_positions.resize(matched);
    std::iota(batch.matched_positions.begin(), batch.matched_positions.end(), 0);
  } else {
    AlignmentPlan plan = greedy_align(teacher, student);
    batch.teacher_aligned = apply_alignment(teacher, plan);
    batch.matched_positions = plan.matched_positions;
    std::sort(batch.matched_positions.begin(), batch.matched_positions.end());
  }
  return batch;
}

}  // namespace clir
