#include "clir/maxsim.hpp"

#include <cmath>
#include <string>

#include "clir/error.hpp"

namespace clir {

std::pair<RelevanceScore, MaxSimTrace> maxsim_score(const EmbeddingMatrix& q,
                                                    const EmbeddingMatrix& d) {
  if (q.dim() != d.dim())
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(q.dim()) +
                                            " vs doc dim " + std::to_string(d.dim()));
  if (q.tokens() == 0 || d.tokens() == 0)
    throw Error(ErrorCode::EmptyInput, "maxsim over an empty token sequence");

  MaxSimTrace trace;
  trace.query_tokens = q.tokens();
  trace.doc_tokens = d.tokens();
  trace.dim = q.dim();
  trace.argmax.resize(q.tokens());
  trace.winning_sim.resize(q.tokens());

  double total = 0.0;
  for (std::size_t i = 0; i < q.tokens(); ++i) {
    std::size_t best_j = 0;
    double best = dot(q.row(i), d.row(0));
    for (std::size_t j = 1; j < d.tokens(); ++j) {
      double s = dot(q.row(i), d.row(j));
      if (s > best) {  // strict: ties stay with the lowest j
        best = s;
        best_j = j;
      }
    }
    trace.argmax[i] = best_j;
    trace.winning_sim[i] = best;
    total += best;
  }
  return {RelevanceScore{total}, trace};
}

TripleLossResult triple_loss(double s_pos, double s_neg) {
  if (!std::isfinite(s_pos) || !std::isfinite(s_neg))
    throw Error(ErrorCode::EmptyInput, "non-finite relevance score");

  // loss = -log softmax([s_pos, s_neg])[0] = softplus(s_neg - s_pos)
  double delta = s_pos - s_neg;
  TripleLossResult r;
  r.loss = delta > 0.0 ? std::log1p(std::exp(-delta))
                       : -delta + std::log1p(std::exp(delta));
  double p_neg = 1.0 / (1.0 + std::exp(delta));  // softmax weight of the negative
  r.grad_pos = -p_neg;
  r.grad_neg = p_neg;
  return r;
}

std::pair<Matrix, Matrix> maxsim_backward(const MaxSimTrace& trace, double upstream,
                                          const EmbeddingMatrix& q,
                                          const EmbeddingMatrix& d) {
  if (trace.query_tokens != q.tokens() || trace.doc_tokens != d.tokens() ||
      trace.dim != q.dim() || q.dim() != d.dim() ||
      trace.argmax.size() != trace.query_tokens)
    throw Error(ErrorCode::TraceMismatch, "trace shape inconsistent with inputs");

  Matrix grad_q(q.tokens(), q.dim());
  Matrix grad_d(d.tokens(), d.dim());
  for (std::size_t i = 0; i < q.tokens(); ++i) {
    std::size_t j = trace.argmax[i];
    if (j >= d.tokens())
      throw Error(ErrorCode::TraceMismatch, "trace argmax out of range");
    for (std::size_t c = 0; c < q.dim(); ++c) {
      grad_q(i, c) += upstream * d.row(j)[c];
      grad_d(j, c) += upstream * q.row(i)[c];
    }
  }
  return {std::move(grad_q), std::move(grad_d)};
}

}  // namespace clir
