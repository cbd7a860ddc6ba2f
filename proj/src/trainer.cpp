#include "clir/trainer.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <ostream>

#include "clir/distill.hpp"
#include "clir/error.hpp"
#include "clir/maxsim.hpp"
#include "clir/rng.hpp"

namespace clir {

const char* stage_kind_name(StageKind kind) {
  switch (kind) {
    case StageKind::finetune_triples: return "finetune_triples";
    case StageKind::kd_relevance: return "kd_relevance";
    case StageKind::kd_representation: return "kd_representation";
  }
  return "unknown";
}

namespace {

struct ScoredTriple {
  MaxSimTrace pos_trace;
  MaxSimTrace neg_trace;
  EmbeddingMatrix query;
  EmbeddingMatrix pos_doc;
  EmbeddingMatrix neg_doc;
  const TripleRecord* record = nullptr;
  double s_pos = 0.0;
  double s_neg = 0.0;
};

ScoredTriple score_triple(const TripleRecord& triple, const std::vector<int>& query_tokens,
                          const Corpus& corpus, const EncoderParams& params,
                          const StageConfig& config) {
  const DocumentRecord* pos = corpus.find(triple.positive_id);
  const DocumentRecord* neg = corpus.find(triple.negative_id);
  if (pos == nullptr || neg == nullptr) {
    throw Error(ErrorCode::DataKindMismatch,
                "triple " + triple.query_id + " references a document missing from the corpus");
  }
  ScoredTriple out;
  out.record = &triple;
  out.query = encode(query_tokens, params, config.max_query_tokens);
  out.pos_doc = encode(pos->token_ids, params, config.max_doc_tokens);
  out.neg_doc = encode(neg->token_ids, params, config.max_doc_tokens);
  auto [sp, tp] = maxsim_score(out.query, out.pos_doc);
  auto [sn, tn] = maxsim_score(out.query, out.neg_doc);
  out.s_pos = sp.value;
  out.s_neg = sn.value;
  out.pos_trace = std::move(tp);
  out.neg_trace = std::move(tn);
  return out;
}

void accumulate_triple_grads(const ScoredTriple& st, double upstream_pos, double upstream_neg,
                             const std::vector<int>& query_tokens, const Corpus& corpus,
                             const EncoderParams& params, const StageConfig& config,
                             EncoderGrads& grads) {
  const DocumentRecord* pos = corpus.find(st.record->positive_id);
  const DocumentRecord* neg = corpus.find(st.record->negative_id);
  auto [gq_pos, gd_pos] = maxsim_backward(st.pos_trace, upstream_pos, st.query, st.pos_doc);
  auto [gq_neg, gd_neg] = maxsim_backward(st.neg_trace, upstream_neg, st.query, st.neg_doc);
  // The query feeds both branches; its gradients add.
  Matrix gq = gq_pos;
  for (std::size_t i = 0; i < gq.values().size(); ++i) gq.values()[i] += gq_neg.values()[i];
  grads.accumulate(encode_backward(query_tokens, params, gq, config.max_query_tokens));
  grads.accumulate(encode_backward(pos->token_ids, params, gd_pos, config.max_doc_tokens));
  grads.accumulate(encode_backward(neg->token_ids, params, gd_neg, config.max_doc_tokens));
}

double finetune_batch(const std::vector<const TripleRecord*>& batch, const Corpus& corpus,
                      EncoderParams& params, const StageConfig& config) {
  EncoderGrads grads = zero_grads(params);
  double loss_sum = 0.0;
  for (const TripleRecord* triple : batch) {
    ScoredTriple st = score_triple(*triple, triple->query_tokens, corpus, params, config);
    TripleLossResult tl = triple_loss(st.s_pos, st.s_neg);
    loss_sum += tl.loss;
    accumulate_triple_grads(st, tl.grad_pos, tl.grad_neg, triple->query_tokens, corpus, params,
                            config, grads);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  grads.scale(inv);
  sgd_step(params, grads, config.learning_rate);
  return loss_sum * inv;
}

double kd_relevance_batch(const std::vector<const TripleRecord*>& batch, const Corpus& corpus,
                          EncoderParams& params, const EncoderParams& teacher,
                          const StageConfig& config) {
  std::vector<ScorePair> teacher_scores;
  std::vector<ScorePair> student_scores;
  std::vector<ScoredTriple> scored;
  teacher_scores.reserve(batch.size());
  student_scores.reserve(batch.size());
  scored.reserve(batch.size());
  for (const TripleRecord* triple : batch) {
    if (!triple->has_teacher_query()) {
      throw Error(ErrorCode::MissingTeacher,
                  "triple " + triple->query_id + " lacks the teacher-side query tokens");
    }
    ScoredTriple ts =
        score_triple(*triple, triple->query_tokens_teacher, corpus, teacher, config);
    teacher_scores.push_back({ts.s_pos, ts.s_neg});
    scored.push_back(score_triple(*triple, triple->query_tokens, corpus, params, config));
    student_scores.push_back({scored.back().s_pos, scored.back().s_neg});
  }
  KDRelevanceBatch kd{std::move(teacher_scores), std::move(student_scores), config.tau};
  KDRelevanceResult res = kd_relevance_loss(kd);
  EncoderGrads grads = zero_grads(params);
  for (std::size_t i = 0; i < scored.size(); ++i) {
    accumulate_triple_grads(scored[i], res.grads[i].pos, res.grads[i].neg,
                            scored[i].record->query_tokens, corpus, params, config, grads);
  }
  sgd_step(params, grads, config.learning_rate);
  return res.loss;
}

double kd_repr_pair(const ParallelPair& pair, PairKind kind, EncoderParams& params,
                    const EncoderParams& teacher, const StageConfig& config,
                    EncoderGrads& grads) {
  const std::vector<int>& student_tokens =
      kind == PairKind::cross_lingual ? pair.non_english_tokens : pair.english_tokens;
  EmbeddingMatrix teacher_emb = encode(pair.english_tokens, teacher, config.max_doc_tokens);
  EmbeddingMatrix student_emb = encode(student_tokens, params, config.max_doc_tokens);
  KDReprBatch batch = make_repr_batch(kind, teacher_emb, student_emb);
  KDReprResult res = kd_repr_loss(batch);
  grads.accumulate(encode_backward(student_tokens, params, res.grad_student,
                                   config.max_doc_tokens));
  return res.loss;
}

double kd_repr_batch_step(const std::vector<const ParallelPair*>& batch, EncoderParams& params,
                          const EncoderParams& teacher, const StageConfig& config) {
  EncoderGrads grads = zero_grads(params);
  double loss_sum = 0.0;
  // Each pair contributes a cross-lingual term and an English self-distillation
  // term, averaged so both losses stay on the per-example scale.
  for (const ParallelPair* pair : batch) {
    double l = kd_repr_pair(*pair, PairKind::cross_lingual, params, teacher, config, grads);
    l += kd_repr_pair(*pair, PairKind::english_identity, params, teacher, config, grads);
    loss_sum += 0.5 * l;
  }
  const double inv = 0.5 / static_cast<double>(batch.size());
  grads.scale(inv);
  sgd_step(params, grads, config.learning_rate);
  return loss_sum / static_cast<double>(batch.size());
}

template <typename T>
std::vector<std::vector<const T*>> make_batches(const std::vector<T>& items,
                                                std::size_t batch_size, Rng& rng) {
  std::vector<const T*> order;
  order.reserve(items.size());
  for (const T& item : items) order.push_back(&item);
  rng.shuffle(order);
  std::vector<std::vector<const T*>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

}  // namespace

EncoderParams run_stage(const EncoderParams& model, const EncoderParams* teacher,
                        const StageConfig& config, const StageData& data, std::ostream* log,
                        const std::string& stage_name) {
  if (config.batch_size == 0) {
    throw Error(ErrorCode::InvalidSpec, "batch_size must be positive");
  }
  const bool needs_teacher = config.kind != StageKind::finetune_triples;
  if (needs_teacher && teacher == nullptr) {
    throw Error(ErrorCode::MissingTeacher,
                std::string(stage_kind_name(config.kind)) + " requires a teacher model");
  }
  if (config.kind == StageKind::kd_representation) {
    if (data.pairs == nullptr || data.pairs->empty()) {
      throw Error(ErrorCode::DataKindMismatch, "kd_representation needs parallel pairs");
    }
  } else {
    if (data.corpus == nullptr || data.triples == nullptr || data.triples->empty()) {
      throw Error(ErrorCode::DataKindMismatch,
                  std::string(stage_kind_name(config.kind)) + " needs a corpus and triples");
    }
  }

  EncoderParams params = model;
  Rng rng(config.seed);
  const std::string label = stage_name.empty() ? stage_kind_name(config.kind) : stage_name;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t batch_count = 0;
    if (config.kind == StageKind::kd_representation) {
      for (const auto& batch : make_batches(*data.pairs, config.batch_size, rng)) {
        loss_sum += kd_repr_batch_step(batch, params, *teacher, config);
        ++batch_count;
      }
    } else if (config.kind == StageKind::kd_relevance) {
      for (const auto& batch : make_batches(*data.triples, config.batch_size, rng)) {
        loss_sum += kd_relevance_batch(batch, *data.corpus, params, *teacher, config);
        ++batch_count;
      }
    } else {
      for (const auto& batch : make_batches(*data.triples, config.batch_size, rng)) {
        loss_sum += finetune_batch(batch, *data.corpus, params, config);
        ++batch_count;
      }
    }
    if (log != nullptr) {
      (*log) << label << " epoch " << (epoch + 1) << "/" << config.epochs << " mean_loss "
             << loss_sum / static_cast<double>(batch_count) << "\n";
    }
  }
  params.lineage += "+" + std::string(stage_kind_name(config.kind));
  return params;
}

std::map<std::string, EncoderParams> run_pipeline(const PipelineSpec& spec,
                                                  const std::map<std::string, StageData>& data,
                                                  const std::string& out_dir,
                                                  std::ostream* log) {
  std::map<std::string, EncoderParams> registry;
  EncoderParams init = init_encoder(spec.init_seed, spec.vocab_size, spec.hidden, spec.out_dim);
  if (!spec.init_tie_pairs.empty()) {
    tie_token_rows(init, spec.init_tie_pairs, spec.init_tie_noise, spec.init_tie_seed);
  }
  registry.emplace("init", std::move(init));

  auto persist = [&](const std::string& name, const EncoderParams& params) {
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir);
    save_checkpoint(params, (std::filesystem::path(out_dir) / (name + ".ckpt")).string());
  };
  persist("init", registry.at("init"));

  for (const PipelineStage& stage : spec.stages) {
    if (registry.count(stage.name) != 0) {
      throw Error(ErrorCode::InvalidSpec, "duplicate stage name " + stage.name);
    }
    auto base = registry.find(stage.init_from);
    if (base == registry.end()) {
      throw Error(ErrorCode::InvalidSpec,
                  "stage " + stage.name + " starts from unknown checkpoint " + stage.init_from);
    }
    const EncoderParams* teacher = nullptr;
    if (!stage.teacher.empty()) {
      auto it = registry.find(stage.teacher);
      if (it == registry.end()) {
        throw Error(ErrorCode::InvalidSpec,
                    "stage " + stage.name + " names unknown teacher " + stage.teacher);
      }
      teacher = &it->second;
    }
    auto dit = data.find(stage.data_key);
    if (dit == data.end()) {
      throw Error(ErrorCode::InvalidSpec,
                  "stage " + stage.name + " names unknown dataset " + stage.data_key);
    }
    EncoderParams trained =
        run_stage(base->second, teacher, stage.config, dit->second, log, stage.name);
    persist(stage.name, trained);
    registry.emplace(stage.name, std::move(trained));
  }
  return registry;
}

}  // namespace clir
