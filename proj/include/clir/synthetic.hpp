#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clir/data.hpp"

namespace clir {

/// Parameters of a generated bilingual retrieval world. Two disjoint token
/// vocabularies are linked by an injective mapping (the "translation");
/// documents live on the English side, queries exist in both languages.
struct SyntheticWorldSpec {
  std::size_t english_vocab = 200;
  std::size_t student_vocab = 200;
  /// Per-token probability that a parallel pair mistranslates (maps to a
  /// random student token instead of the true image). 0 keeps pairs exact.
  double mapping_noise = 0.0;
  std::size_t corpus_docs = 2000;
  std::size_t doc_len_min = 20;
  std::size_t doc_len_max = 60;
  std::size_t train_queries = 500;
  std::size_t eval_queries = 200;
  std::size_t positives_per_query = 3;
  std::size_t negatives_per_query = 100;
  std::size_t query_len_min = 4;
  std::size_t query_len_max = 8;
  /// Per-token probability that a query token differs from the document
  /// span it was drawn from.
  double corruption_rate = 0.15;
  std::size_t parallel_pairs = 500;
  std::size_t pair_len_min = 8;
  std::size_t pair_len_max = 24;
  std::uint64_t seed = 0;
};

struct SyntheticWorld {
  Corpus corpus;
  /// English-language triples for teacher fine-tuning (no teacher field).
  std::vector<TripleRecord> triples_teacher;
  /// Student-language triples; query_tokens_teacher carries the English
  /// original, so KD relevance stages can score both sides.
  std::vector<TripleRecord> triples_cross;
  std::vector<ParallelPair> pairs;
  std::vector<EvalExample> eval_examples;
  /// english token id -> student token id, one entry per English token.
  std::vector<std::pair<int, int>> mapping;
};

/// Builds the world deterministically from the parameters. Queries are corrupted
/// spans of their source document; the uncorrupted span's surface string is
/// the gold answer and is planted in every positive document. Negatives are
/// verified not to contain the answer. Throws InvalidSpec on contradictory
/// sizes or failed self-checks.
SyntheticWorld gen_synthetic(const SyntheticWorldSpec& spec);

/// Writes corpus.tsv, triples_teacher.tsv, triples_cross.tsv, pairs.tsv,
/// eval.tsv and mapping.tsv under dir, each with the provenance header.
void write_world(const SyntheticWorld& world, const std::string& dir,
                 const std::string& provenance);

}  // namespace clir
