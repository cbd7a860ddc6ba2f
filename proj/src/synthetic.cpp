#include "clir/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "clir/error.hpp"
#include "clir/eval.hpp"
#include "clir/rng.hpp"

namespace clir {

namespace {

void validate(const SyntheticWorldSpec& spec) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (spec.english_vocab == 0 || spec.student_vocab == 0) fail("vocabularies must be non-empty");
  if (spec.student_vocab < spec.english_vocab)
    fail("student vocabulary must be at least as large as the English one");
  if (spec.corpus_docs == 0) fail("corpus_docs must be positive");
  if (spec.doc_len_min == 0 || spec.doc_len_min > spec.doc_len_max)
    fail("document length range is empty");
  if (spec.query_len_min == 0 || spec.query_len_min > spec.query_len_max)
    fail("query length range is empty");
  if (spec.query_len_max > spec.doc_len_min)
    fail("query_len_max must not exceed doc_len_min, spans must fit every document");
  if (spec.pair_len_min == 0 || spec.pair_len_min > spec.pair_len_max)
    fail("pair length range is empty");
  if (spec.positives_per_query == 0) fail("positives_per_query must be positive");
  if (spec.negatives_per_query == 0) fail("negatives_per_query must be positive");
  if (spec.mapping_noise < 0.0 || spec.mapping_noise > 1.0) fail("mapping_noise outside [0,1]");
  if (spec.corruption_rate < 0.0 || spec.corruption_rate > 1.0)
    fail("corruption_rate outside [0,1]");
  // Each query claims one source document, and each train query claims
  // positives_per_query - 1 more for answer planting. No document is
  // claimed twice, so later plants cannot destroy earlier answers.
  std::size_t claimed = spec.train_queries * spec.positives_per_query + spec.eval_queries;
  if (claimed > spec.corpus_docs)
    fail("corpus too small: " + std::to_string(claimed) + " documents claimed by queries, only " +
         std::to_string(spec.corpus_docs) + " available");
  std::size_t per_query_docs = spec.positives_per_query + spec.negatives_per_query;
  if (per_query_docs > spec.corpus_docs)
    fail("corpus too small for positives + negatives of a single query");
}

std::string pad_id(const char* prefix, std::size_t value, std::size_t count) {
  std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  std::string digits = std::to_string(value);
  return std::string(prefix) + std::string(width > digits.size() ? width - digits.size() : 0, '0') +
         digits;
}

std::string word_for(int token_id, std::size_t english_vocab) {
  std::size_t width = std::to_string(english_vocab - 1).size();
  std::string digits = std::to_string(token_id);
  return "w" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

std::string surface_for(const std::vector<int>& tokens, std::size_t english_vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += word_for(tokens[i], english_vocab);
  }
  return out;
}

}  // namespace

SyntheticWorld gen_synthetic(const SyntheticWorldSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  SyntheticWorld world;

  // Translation table. Student ids live above the English range so the two
  // languages share one embedding table without colliding.
  std::vector<std::size_t> perm(spec.student_vocab);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  world.mapping.reserve(spec.english_vocab);
  for (std::size_t e = 0; e < spec.english_vocab; ++e) {
    world.mapping.emplace_back(static_cast<int>(e),
                               static_cast<int>(spec.english_vocab + perm[e]));
  }
  auto translate_exact = [&](const std::vector<int>& english) {
    std::vector<int> out;
    out.reserve(english.size());
    for (int t : english) out.push_back(world.mapping[static_cast<std::size_t>(t)].second);
    return out;
  };
  auto translate_noisy = [&](const std::vector<int>& english) {
    std::vector<int> out;
    out.reserve(english.size());
    for (int t : english) {
      if (spec.mapping_noise > 0.0 && rng.uniform() < spec.mapping_noise) {
        out.push_back(static_cast<int>(spec.english_vocab + rng.below(spec.student_vocab)));
      } else {
        out.push_back(world.mapping[static_cast<std::size_t>(t)].second);
      }
    }
    return out;
  };

  // Base documents as raw token sequences; surface text is derived after
  // all answer spans are planted.
  std::vector<std::vector<int>> docs(spec.corpus_docs);
  for (auto& doc : docs) {
    std::size_t len =
        spec.doc_len_min + rng.below(spec.doc_len_max - spec.doc_len_min + 1);
    doc.resize(len);
    for (int& t : doc) t = static_cast<int>(rng.below(spec.english_vocab));
  }

  // Hand out claimable documents so no span plant overwrites another.
  std::vector<std::size_t> claim_order(spec.corpus_docs);
  std::iota(claim_order.begin(), claim_order.end(), 0);
  rng.shuffle(claim_order);
  std::size_t next_claim = 0;
  auto claim_doc = [&]() { return claim_order[next_claim++]; };

  struct QueryDraft {
    std::string id;
    std::vector<int> english_tokens;   // corrupted span
    std::vector<int> answer_tokens;    // uncorrupted span
    std::vector<std::size_t> positives;
  };

  auto draft_query = [&](const std::string& id, std::size_t positives_wanted) {
    QueryDraft q;
    q.id = id;
    std::size_t source = claim_doc();
    q.positives.push_back(source);
    const std::vector<int>& doc = docs[source];
    std::size_t len = spec.query_len_min + rng.below(spec.query_len_max - spec.query_len_min + 1);
    std::size_t start = rng.below(doc.size() - len + 1);
    q.answer_tokens.assign(doc.begin() + static_cast<std::ptrdiff_t>(start),
                           doc.begin() + static_cast<std::ptrdiff_t>(start + len));
    q.english_tokens = q.answer_tokens;
    for (int& t : q.english_tokens) {
      if (spec.corruption_rate > 0.0 && rng.uniform() < spec.corruption_rate) {
        t = static_cast<int>(rng.below(spec.english_vocab));
      }
    }
    // Plant the answer span into the extra positives.
    for (std::size_t p = 1; p < positives_wanted; ++p) {
      std::size_t target = claim_doc();
      std::vector<int>& tgt = docs[target];
      std::size_t pos = rng.below(tgt.size() - len + 1);
      std::copy(q.answer_tokens.begin(), q.answer_tokens.end(),
                tgt.begin() + static_cast<std::ptrdiff_t>(pos));
      q.positives.push_back(target);
    }
    return q;
  };

  std::vector<QueryDraft> train_drafts;
  train_drafts.reserve(spec.train_queries);
  for (std::size_t i = 0; i < spec.train_queries; ++i) {
    train_drafts.push_back(
        draft_query(pad_id("qt", i, spec.train_queries), spec.positives_per_query));
  }
  std::vector<QueryDraft> eval_drafts;
  eval_drafts.reserve(spec.eval_queries);
  for (std::size_t i = 0; i < spec.eval_queries; ++i) {
    eval_drafts.push_back(draft_query(pad_id("qe", i, spec.eval_queries), 1));
  }

  // Documents are final now; freeze ids and surface text.
  std::vector<std::string> doc_ids(spec.corpus_docs);
  std::vector<std::string> normalized_docs(spec.corpus_docs);
  for (std::size_t i = 0; i < spec.corpus_docs; ++i) {
    DocumentRecord rec;
    rec.doc_id = pad_id("d", i, spec.corpus_docs);
    rec.token_ids = docs[i];
    rec.surface_text = surface_for(docs[i], spec.english_vocab);
    doc_ids[i] = rec.doc_id;
    normalized_docs[i] = normalize_text(rec.surface_text);
    world.corpus.add(std::move(rec));
  }

  auto sample_negatives = [&](const QueryDraft& q, const std::string& answer_norm) {
    std::vector<std::size_t> negatives;
    std::vector<bool> taken(spec.corpus_docs, false);
    for (std::size_t p : q.positives) taken[p] = true;
    std::size_t attempts = 0;
    while (negatives.size() < spec.negatives_per_query) {
      if (++attempts > 1000 * spec.negatives_per_query) {
        throw Error(ErrorCode::InvalidSpec,
                    "could not sample answer-free negatives for query " + q.id);
      }
      std::size_t cand = rng.below(spec.corpus_docs);
      if (taken[cand]) continue;
      if (normalized_docs[cand].find(answer_norm) != std::string::npos) continue;
      taken[cand] = true;
      negatives.push_back(cand);
    }
    return negatives;
  };

  for (const QueryDraft& q : train_drafts) {
    std::string answer = surface_for(q.answer_tokens, spec.english_vocab);
    std::string answer_norm = normalize_text(answer);
    std::vector<std::size_t> negatives = sample_negatives(q, answer_norm);
    std::vector<int> student_tokens = translate_exact(q.english_tokens);
    for (std::size_t p : q.positives) {
      if (normalized_docs[p].find(answer_norm) == std::string::npos) {
        throw Error(ErrorCode::InvalidSpec, "self-check failed: positive lost its answer span");
      }
      for (std::size_t n : negatives) {
        TripleRecord teacher_triple;
        teacher_triple.query_id = q.id;
        teacher_triple.query_tokens = q.english_tokens;
        teacher_triple.positive_id = doc_ids[p];
        teacher_triple.negative_id = doc_ids[n];
        world.triples_teacher.push_back(teacher_triple);

        TripleRecord cross_triple;
        cross_triple.query_id = q.id;
        cross_triple.query_tokens = student_tokens;
        cross_triple.query_tokens_teacher = q.english_tokens;
        cross_triple.positive_id = doc_ids[p];
        cross_triple.negative_id = doc_ids[n];
        world.triples_cross.push_back(std::move(cross_triple));
      }
    }
  }

  for (const QueryDraft& q : eval_drafts) {
    std::string answer = surface_for(q.answer_tokens, spec.english_vocab);
    if (normalized_docs[q.positives[0]].find(normalize_text(answer)) == std::string::npos) {
      throw Error(ErrorCode::InvalidSpec, "self-check failed: eval answer missing from source");
    }
    EvalExample example;
    example.query_id = q.id;
    example.query_tokens = translate_exact(q.english_tokens);
    example.query_tokens_teacher = q.english_tokens;
    example.gold_answers.push_back(std::move(answer));
    world.eval_examples.push_back(std::move(example));
  }

  for (std::size_t i = 0; i < spec.parallel_pairs; ++i) {
    ParallelPair pair;
    pair.pair_id = pad_id("p", i, spec.parallel_pairs);
    std::size_t len = spec.pair_len_min + rng.below(spec.pair_len_max - spec.pair_len_min + 1);
    pair.english_tokens.resize(len);
    for (int& t : pair.english_tokens) t = static_cast<int>(rng.below(spec.english_vocab));
    pair.non_english_tokens = translate_noisy(pair.english_tokens);
    if (spec.mapping_noise == 0.0 && pair.non_english_tokens != translate_exact(pair.english_tokens)) {
      throw Error(ErrorCode::InvalidSpec, "self-check failed: noiseless pair is not exact");
    }
    world.pairs.push_back(std::move(pair));
  }

  return world;
}

void write_world(const SyntheticWorld& world, const std::string& dir,
                 const std::string& provenance) {
  std::filesystem::create_directories(dir);
  std::filesystem::path base(dir);
  save_corpus((base / "corpus.tsv").string(), world.corpus, provenance);
  save_triples((base / "triples_teacher.tsv").string(), world.triples_teacher, provenance);
  save_triples((base / "triples_cross.tsv").string(), world.triples_cross, provenance);
  save_pairs((base / "pairs.tsv").string(), world.pairs, provenance);
  save_eval_set((base / "eval.tsv").string(), world.eval_examples, provenance);
  save_mapping((base / "mapping.tsv").string(), world.mapping, provenance);
}

}  // namespace clir
