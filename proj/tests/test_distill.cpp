#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numeric>

#include "clir/distill.hpp"
#include "clir/error.hpp"
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

KDRelevanceBatch random_relevance_batch(Rng& rng, std::size_t n, double tau) {
  KDRelevanceBatch batch;
  batch.tau = tau;
  for (std::size_t i = 0; i < n; ++i) {
    batch.teacher_scores.push_back({rng.gauss() * 2.0, rng.gauss() * 2.0});
    batch.student_scores.push_back({rng.gauss() * 2.0, rng.gauss() * 2.0});
  }
  return batch;
}

}  // namespace

TEST_CASE("matching teacher and student scores give zero loss and gradients") {
  KDRelevanceBatch batch;
  batch.tau = 2.0;
  batch.teacher_scores = {{1.2, -0.4}, {0.0, 3.0}};
  batch.student_scores = {{1.2, -0.4}, {0.0, 3.0}};
  auto r = kd_relevance_loss(batch);
  CHECK(std::fabs(r.loss) <= 1e-12);
  for (const auto& g : r.grads) {
    CHECK(std::fabs(g.pos) <= 1e-12);
    CHECK(std::fabs(g.neg) <= 1e-12);
  }
}

TEST_CASE("relevance loss fixture: teacher (2,0), student (0,0), tau 2") {
  KDRelevanceBatch batch;
  batch.tau = 2.0;
  batch.teacher_scores = {{2.0, 0.0}};
  batch.student_scores = {{0.0, 0.0}};
  auto r = kd_relevance_loss(batch);
  // p = [sigma(1), 1-sigma(1)], q = [0.5, 0.5]; KL(p||q) independently
  // computed as 0.11094407167172735.
  double kl = r.loss / (batch.tau * batch.tau);
  CHECK(std::fabs(kl - 0.11087) < 1e-4);
  CHECK(std::fabs(r.loss - 0.44348) < 1e-3);
  CHECK(kl == doctest::Approx(0.11094407167172735).epsilon(1e-12));
  CHECK(r.loss == doctest::Approx(0.4437762866869094).epsilon(1e-12));
}

TEST_CASE("relevance gradients match finite differences of the batch loss") {
  Rng rng(301);
  for (double tau : {0.5, 1.0, 2.0, 4.0}) {
    KDRelevanceBatch batch = random_relevance_batch(rng, 4, tau);
    auto r = kd_relevance_loss(batch);
    std::vector<double> analytic;
    for (const auto& g : r.grads) {
      analytic.push_back(g.pos);
      analytic.push_back(g.neg);
    }
    auto loss_at = [&](std::size_t i, double delta) {
      KDRelevanceBatch perturbed = batch;
      auto& pair = perturbed.student_scores[i / 2];
      (i % 2 == 0 ? pair.pos : pair.neg) += delta;
      return kd_relevance_loss(perturbed).loss;
    };
    auto check = testutil::gradcheck(loss_at, analytic);
    CHECK(check.worst_rel < 1e-4);
  }
}

TEST_CASE("relevance loss depends only on score differences") {
  KDRelevanceBatch batch;
  batch.tau = 2.0;
  batch.teacher_scores = {{3.0, 1.0}};
  batch.student_scores = {{5.0, 3.0}};  // same pos-neg gap of 2
  auto r = kd_relevance_loss(batch);
  CHECK(std::fabs(r.loss) <= 1e-12);

  Rng rng(302);
  KDRelevanceBatch base = random_relevance_batch(rng, 3, 1.5);
  KDRelevanceBatch shifted = base;
  shifted.student_scores[1].pos += 7.25;
  shifted.student_scores[1].neg += 7.25;
  shifted.teacher_scores[2].pos -= 3.5;
  shifted.teacher_scores[2].neg -= 3.5;
  CHECK(kd_relevance_loss(shifted).loss ==
        doctest::Approx(kd_relevance_loss(base).loss).epsilon(1e-12));
}

TEST_CASE("relevance loss is non-negative on random batches") {
  Rng rng(303);
  for (int trial = 0; trial < 50; ++trial) {
    auto r = kd_relevance_loss(random_relevance_batch(rng, 1 + rng.below(6), 2.0));
    CHECK(r.loss >= -1e-15);
  }
}

TEST_CASE("relevance loss validates temperature and lengths") {
  KDRelevanceBatch batch;
  batch.teacher_scores = {{1.0, 0.0}};
  batch.student_scores = {{1.0, 0.0}};
  batch.tau = 0.0;
  try {
    kd_relevance_loss(batch);
    FAIL("expected NonPositiveTemperature");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveTemperature);
  }
  batch.tau = 2.0;
  batch.student_scores.push_back({0.0, 0.0});
  try {
    kd_relevance_loss(batch);
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
  KDRelevanceBatch empty;
  empty.tau = 1.0;
  CHECK_THROWS_AS(kd_relevance_loss(empty), Error);
}

TEST_CASE("identical matched embeddings give zero representation loss") {
  Rng rng(311);
  auto emb = random_embeddings(rng, 4, 6);
  KDReprBatch batch{emb, emb, {0, 1, 2, 3}};
  auto r = kd_repr_loss(batch);
  CHECK(r.loss == 0.0);
  for (double v : r.grad_student.values()) CHECK(v == 0.0);
}

TEST_CASE("orthogonal unit rows give representation loss 1") {
  KDReprBatch batch;
  batch.student = EmbeddingMatrix(Matrix::from_rows({{1.0, 0.0}}), true);
  batch.teacher_aligned = EmbeddingMatrix(Matrix::from_rows({{0.0, 1.0}}), true);
  batch.matched_positions = {0};
  auto r = kd_repr_loss(batch);
  CHECK(r.loss == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("representation loss matches elementwise recomputation and finite differences") {
  Rng rng(312);
  auto student = random_embeddings(rng, 5, 8);
  auto teacher = random_embeddings(rng, 5, 8);
  std::vector<std::size_t> matched{0, 2, 4};
  KDReprBatch batch{student, teacher, matched};
  auto r = kd_repr_loss(batch);

  double expected = 0.0;
  for (std::size_t j : matched) {
    for (std::size_t c = 0; c < 8; ++c) {
      double diff = student.row(j)[c] - teacher.row(j)[c];
      expected += diff * diff;
    }
  }
  expected /= static_cast<double>(matched.size() * 8);
  CHECK(r.loss == doctest::Approx(expected).epsilon(1e-12));

  std::vector<double> analytic;
  for (double v : r.grad_student.values()) analytic.push_back(v);
  auto loss_at = [&](std::size_t i, double delta) {
    Matrix perturbed = student.matrix();
    perturbed.values()[i] += delta;
    KDReprBatch b{EmbeddingMatrix(perturbed, true), teacher, matched};
    return kd_repr_loss(b).loss;
  };
  auto check = testutil::gradcheck(loss_at, analytic);
  CHECK(check.worst_rel < 1e-4);

  // Unmatched rows receive no gradient.
  for (std::size_t c = 0; c < 8; ++c) {
    CHECK(r.grad_student(1, c) == 0.0);
    CHECK(r.grad_student(3, c) == 0.0);
  }
}

TEST_CASE("a small gradient step decreases the representation loss") {
  Rng rng(313);
  for (int trial = 0; trial < 20; ++trial) {
    auto student = random_embeddings(rng, 4, 6);
    auto teacher = random_embeddings(rng, 4, 6);
    KDReprBatch batch{student, teacher, {0, 1, 2, 3}};
    auto r = kd_repr_loss(batch);
    Matrix stepped = student.matrix();
    for (std::size_t i = 0; i < stepped.values().size(); ++i) {
      stepped.values()[i] -= 1e-3 * r.grad_student.values()[i];
    }
    KDReprBatch after{EmbeddingMatrix(stepped, true), teacher, batch.matched_positions};
    CHECK(kd_repr_loss(after).loss < r.loss);
  }
}

TEST_CASE("representation loss validates matches and dims") {
  Rng rng(314);
  auto student = random_embeddings(rng, 3, 4);
  auto teacher = random_embeddings(rng, 3, 4);
  KDReprBatch no_matches{student, teacher, {}};
  try {
    kd_repr_loss(no_matches);
    FAIL("expected EmptyMatchSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMatchSet);
  }
  auto wrong_dim = random_embeddings(rng, 3, 5);
  KDReprBatch mismatched{student, wrong_dim, {0}};
  CHECK_THROWS_AS(kd_repr_loss(mismatched), Error);
  KDReprBatch out_of_range{student, teacher, {3}};
  CHECK_THROWS_AS(kd_repr_loss(out_of_range), Error);
}

TEST_CASE("english_identity batches match all shared positions, teacher unreordered") {
  Rng rng(321);
  auto teacher = random_embeddings(rng, 4, 6);
  auto student = random_embeddings(rng, 4, 6);
  KDReprBatch batch = make_repr_batch(PairKind::english_identity, teacher, student);
  CHECK(batch.matched_positions == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(batch.teacher_aligned.matrix() == teacher.matrix());

  auto shorter = random_embeddings(rng, 2, 6);
  KDReprBatch clipped = make_repr_batch(PairKind::english_identity, shorter, student);
  CHECK(clipped.matched_positions == std::vector<std::size_t>{0, 1});
}

TEST_CASE("cross_lingual batch on a row permutation reaches zero loss") {
  Rng rng(322);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t tokens = 2 + rng.below(6);
    auto teacher = random_embeddings(rng, tokens, 7);
    std::vector<std::size_t> order(tokens);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    Matrix shuffled(tokens, 7);
    for (std::size_t p = 0; p < tokens; ++p) {
      for (std::size_t c = 0; c < 7; ++c) shuffled(p, c) = teacher.row(order[p])[c];
    }
    EmbeddingMatrix student(shuffled, true);
    KDReprBatch batch = make_repr_batch(PairKind::cross_lingual, teacher, student);
    CHECK(batch.teacher_aligned.matrix() == student.matrix());
    CHECK(kd_repr_loss(batch).loss == doctest::Approx(0.0).epsilon(1e-18));
  }
}

TEST_CASE("cross_lingual batch with unequal lengths matches min(T, S) positions") {
  Rng rng(323);
  auto teacher = random_embeddings(rng, 3, 5);
  auto student = random_embeddings(rng, 5, 5);
  KDReprBatch batch = make_repr_batch(PairKind::cross_lingual, teacher, student);
  CHECK(batch.matched_positions.size() == 3);
  for (std::size_t p : batch.matched_positions) CHECK(p < 5);
  CHECK_NOTHROW(kd_repr_loss(batch));
}
