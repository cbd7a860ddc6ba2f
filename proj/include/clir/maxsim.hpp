#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "clir/matrix.hpp"

namespace clir {

struct RelevanceScore {
  double value = 0.0;
};

/// Per query token: the winning document token and its similarity.
/// Needed to route subgradients through the max.
struct MaxSimTrace {
  std::size_t query_tokens = 0;
  std::size_t doc_tokens = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> argmax;       // j*(i), ties broken toward lowest j
  std::vector<double> winning_sim;
};

/// Late-interaction relevance: sum over query tokens of the max dot
/// product against all document tokens. Inputs are expected to be
/// row-normalized, making this a cosine max-sim.
std::pair<RelevanceScore, MaxSimTrace> maxsim_score(const EmbeddingMatrix& q,
                                                    const EmbeddingMatrix& d);

struct TripleLossResult {
  double loss = 0.0;
  double grad_pos = 0.0;
  double grad_neg = 0.0;
};

/// Pairwise softmax cross-entropy over (s_pos, s_neg) at temperature 1,
/// with exact analytic partials.
TripleLossResult triple_loss(double s_pos, double s_neg);

/// Subgradient of maxsim_score: all gradient is routed to the argmax
/// document token recorded in the trace.
///   grad_q[i]  = upstream * d[j*(i)]
///   grad_d[j]  = upstream * sum of q[i] over i with j*(i) = j
std::pair<Matrix, Matrix> maxsim_backward(const MaxSimTrace& trace, double upstream,
                                          const EmbeddingMatrix& q,
                                          const EmbeddingMatrix& d);

}  // namespace clir
