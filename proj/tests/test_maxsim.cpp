#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>

#include "clir/error.hpp"
#include "clir/maxsim.hpp"
#include "clir/rng.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace clir;

namespace {

EmbeddingMatrix random_embeddings(Rng& rng, std::size_t tokens, std::size_t dim) {
  Matrix m(tokens, dim);
  for (double& v : m.values()) v = rng.gauss();
  return EmbeddingMatrix::normalized_from(m);
}

/// Deliberately naive recomputation: manual dot products, explicit loops.
double brute_force_maxsim(const EmbeddingMatrix& q, const EmbeddingMatrix& d) {
  double total = 0.0;
  for (std::size_t i = 0; i < q.tokens(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d.tokens(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < q.dim(); ++c) s += q.row(i)[c] * d.row(j)[c];
      if (s > best) best = s;
    }
    total += best;
  }
  return total;
}

/// Smallest winning margin across query tokens; finite-difference checks
/// must stay away from argmax ties.
double min_winning_margin(const EmbeddingMatrix& q, const EmbeddingMatrix& d) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.tokens(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    double second = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d.tokens(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < q.dim(); ++c) s += q.row(i)[c] * d.row(j)[c];
      if (s > best) {
        second = best;
        best = s;
      } else if (s > second) {
        second = s;
      }
    }
    if (d.tokens() > 1) margin = std::min(margin, best - second);
  }
  return margin;
}

}  // namespace

TEST_CASE("exact-match token scores 1 with argmax 0") {
  EmbeddingMatrix q(Matrix::from_rows({{1.0, 0.0}}), true);
  EmbeddingMatrix d(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}), true);
  auto [score, trace] = maxsim_score(q, d);
  CHECK(score.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(trace.argmax.size() == 1);
  CHECK(trace.argmax[0] == 0);
  CHECK(trace.winning_sim[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a single doc token can win for every query token") {
  EmbeddingMatrix q(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}), true);
  EmbeddingMatrix d(Matrix::from_rows({{1.0, 0.0}}), true);
  auto [score, trace] = maxsim_score(q, d);
  CHECK(score.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(trace.argmax[0] == 0);
  CHECK(trace.argmax[1] == 0);
}

TEST_CASE("score equals brute-force recomputation on random pairs") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    auto q = random_embeddings(rng, 3, 8);
    auto d = random_embeddings(rng, 5, 8);
    auto [score, trace] = maxsim_score(q, d);
    CHECK(score.value == doctest::Approx(brute_force_maxsim(q, d)).epsilon(1e-9));
    double sum = 0.0;
    for (double w : trace.winning_sim) sum += w;
    CHECK(score.value == doctest::Approx(sum).epsilon(1e-9));
    for (std::size_t j : trace.argmax) CHECK(j < d.tokens());
  }
}

TEST_CASE("score bounded by query token count for normalized inputs") {
  Rng rng(102);
  auto q = random_embeddings(rng, 7, 4);
  auto d = random_embeddings(rng, 9, 4);
  auto [score, trace] = maxsim_score(q, d);
  CHECK(std::fabs(score.value) <= static_cast<double>(q.tokens()) + 1e-9);
}

TEST_CASE("doc token permutation preserves the score") {
  Rng rng(103);
  auto q = random_embeddings(rng, 4, 6);
  auto d = random_embeddings(rng, 5, 6);
  Matrix reversed(d.tokens(), d.dim());
  for (std::size_t j = 0; j < d.tokens(); ++j) {
    for (std::size_t c = 0; c < d.dim(); ++c) {
      reversed(j, c) = d.row(d.tokens() - 1 - j)[c];
    }
  }
  auto [before, t1] = maxsim_score(q, d);
  auto [after, t2] = maxsim_score(q, EmbeddingMatrix(reversed, true));
  CHECK(before.value == doctest::Approx(after.value).epsilon(1e-12));
}

TEST_CASE("appending a doc token never lowers the score") {
  Rng rng(104);
  for (int trial = 0; trial < 20; ++trial) {
    auto q = random_embeddings(rng, 3, 5);
    auto d = random_embeddings(rng, 4, 5);
    auto extra = random_embeddings(rng, 1, 5);
    Matrix bigger(d.tokens() + 1, d.dim());
    for (std::size_t j = 0; j < d.tokens(); ++j) {
      for (std::size_t c = 0; c < d.dim(); ++c) bigger(j, c) = d.row(j)[c];
    }
    for (std::size_t c = 0; c < d.dim(); ++c) bigger(d.tokens(), c) = extra.row(0)[c];
    auto [small, t1] = maxsim_score(q, d);
    auto [big, t2] = maxsim_score(q, EmbeddingMatrix(bigger, true));
    CHECK(big.value >= small.value - 1e-12);
  }
}

TEST_CASE("argmax ties break toward the lowest doc index") {
  EmbeddingMatrix q(Matrix::from_rows({{1.0, 0.0}}), true);
  EmbeddingMatrix d(Matrix::from_rows({{0.0, 1.0}, {1.0, 0.0}, {1.0, 0.0}}), true);
  auto [score, trace] = maxsim_score(q, d);
  CHECK(trace.argmax[0] == 1);
}

TEST_CASE("maxsim rejects dim mismatch and empty inputs") {
  EmbeddingMatrix q(Matrix::from_rows({{1.0, 0.0}}), true);
  EmbeddingMatrix d3(Matrix::from_rows({{1.0, 0.0, 0.0}}), true);
  try {
    maxsim_score(q, d3);
    FAIL("expected DimMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimMismatch);
  }
  CHECK_THROWS_AS(maxsim_score(EmbeddingMatrix(), q), Error);
  CHECK_THROWS_AS(maxsim_score(q, EmbeddingMatrix()), Error);
}

TEST_CASE("triple loss of equal scores is ln 2") {
  auto r = triple_loss(0.37, 0.37);
  CHECK(r.loss == doctest::Approx(0.6931471805599453).epsilon(1e-9));
  CHECK(r.grad_pos == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(r.grad_neg == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("triple loss saturates for a huge positive margin") {
  auto r = triple_loss(51.0, 1.0);
  CHECK(r.loss < 1e-20);
  CHECK(std::isfinite(r.loss));
}

TEST_CASE("triple loss at (1, 2) matches the independently computed value") {
  // ln(1 + e) computed with an independent calculator.
  auto r = triple_loss(1.0, 2.0);
  CHECK(r.loss == doctest::Approx(1.3132616875182228).epsilon(1e-6));
}

TEST_CASE("triple loss gradients sum to zero and match finite differences") {
  Rng rng(111);
  for (int trial = 0; trial < 30; ++trial) {
    double s_pos = rng.gauss() * 3.0;
    double s_neg = rng.gauss() * 3.0;
    auto r = triple_loss(s_pos, s_neg);
    CHECK(r.grad_pos + r.grad_neg == doctest::Approx(0.0).epsilon(1e-12));
    auto loss_at = [&](std::size_t i, double delta) {
      double p = s_pos + (i == 0 ? delta : 0.0);
      double n = s_neg + (i == 1 ? delta : 0.0);
      return triple_loss(p, n).loss;
    };
    auto check = testutil::gradcheck(loss_at, {r.grad_pos, r.grad_neg});
    CHECK(check.worst_rel < 1e-4);
  }
}

TEST_CASE("swapped-argument triple losses sum to at least 2 ln 2") {
  Rng rng(112);
  for (int trial = 0; trial < 30; ++trial) {
    double a = rng.gauss() * 2.0;
    double b = rng.gauss() * 2.0;
    double sum = triple_loss(a, b).loss + triple_loss(b, a).loss;
    CHECK(sum >= 2.0 * 0.6931471805599453 - 1e-12);
  }
  double eq = triple_loss(1.5, 1.5).loss;
  CHECK(2.0 * eq == doctest::Approx(2.0 * 0.6931471805599453).epsilon(1e-12));
}

TEST_CASE("backward routes everything to the single winner") {
  EmbeddingMatrix q(Matrix::from_rows({{1.0, 0.0}}), true);
  EmbeddingMatrix d(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}), true);
  auto [score, trace] = maxsim_score(q, d);
  auto [gq, gd] = maxsim_backward(trace, 1.0, q, d);
  CHECK(gq == Matrix::from_rows({{1.0, 0.0}}));
  CHECK(gd == Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}}));
}

TEST_CASE("zero upstream yields zero gradients") {
  Rng rng(113);
  auto q = random_embeddings(rng, 3, 4);
  auto d = random_embeddings(rng, 5, 4);
  auto [score, trace] = maxsim_score(q, d);
  auto [gq, gd] = maxsim_backward(trace, 0.0, q, d);
  for (double v : gq.values()) CHECK(v == 0.0);
  for (double v : gd.values()) CHECK(v == 0.0);
}

TEST_CASE("backward matches finite differences away from ties") {
  Rng rng(114);
  int checked = 0;
  while (checked < 10) {
    auto q = random_embeddings(rng, 3, 5);
    auto d = random_embeddings(rng, 4, 5);
    if (min_winning_margin(q, d) <= 1e-3) continue;
    ++checked;
    auto [score, trace] = maxsim_score(q, d);
    double upstream = 1.7;
    auto [gq, gd] = maxsim_backward(trace, upstream, q, d);

    std::vector<double> analytic;
    for (double v : gq.values()) analytic.push_back(v);
    for (double v : gd.values()) analytic.push_back(v);
    std::size_t q_count = gq.values().size();
    auto loss_at = [&](std::size_t i, double delta) {
      Matrix qm = q.matrix();
      Matrix dm = d.matrix();
      if (i < q_count) {
        qm.values()[i] += delta;
      } else {
        dm.values()[i - q_count] += delta;
      }
      auto [s, t] =
          maxsim_score(EmbeddingMatrix(qm, true), EmbeddingMatrix(dm, true));
      return upstream * s.value;
    };
    auto check = testutil::gradcheck(loss_at, analytic);
    CHECK(check.worst_rel < 1e-4);
  }
}

TEST_CASE("backward rejects traces from other shapes") {
  Rng rng(115);
  auto q = random_embeddings(rng, 3, 4);
  auto d = random_embeddings(rng, 5, 4);
  auto other_d = random_embeddings(rng, 6, 4);
  auto [score, trace] = maxsim_score(q, d);
  try {
    maxsim_backward(trace, 1.0, q, other_d);
    FAIL("expected TraceMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TraceMismatch);
  }
}
