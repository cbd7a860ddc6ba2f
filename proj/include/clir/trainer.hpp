#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clir/data.hpp"
#include "clir/encoder.hpp"

namespace clir {

enum class StageKind {
  finetune_triples,   // pairwise softmax CE over maxsim scores
  kd_relevance,       // KL over teacher/student score pairs
  kd_representation,  // MSE over aligned token embeddings
};

const char* stage_kind_name(StageKind kind);

struct StageConfig {
  StageKind kind = StageKind::finetune_triples;
  double learning_rate = 6e-6;       // lr(XOR)
  std::size_t epochs = 5;            // Epochs(XOR)
  double tau = 2.0;                  // temperature(XOR), kd_relevance only
  std::size_t batch_size = 192;
  std::uint64_t seed = 0;
  std::size_t max_query_tokens = 32;   // query_maxlen
  std::size_t max_doc_tokens = 180;    // doc_maxlen
};

/// Datasets a stage may consume. finetune_triples and kd_relevance need
/// corpus + triples; kd_representation needs pairs.
struct StageData {
  const Corpus* corpus = nullptr;
  const std::vector<TripleRecord>* triples = nullptr;
  const std::vector<ParallelPair>* pairs = nullptr;
};

/// Runs one training stage with plain SGD over seeded shuffled batches and
/// returns the updated parameters. The teacher is never modified. Each
/// epoch appends one `stage epoch mean_loss` line to `log` when given.
EncoderParams run_stage(const EncoderParams& model, const EncoderParams* teacher,
                        const StageConfig& config, const StageData& data,
                        std::ostream* log = nullptr, const std::string& stage_name = "");

enum class Role { teacher, student };

struct PipelineStage {
  std::string name;           // checkpoint name for the stage's output
  Role role = Role::student;
  StageConfig config;
  std::string data_key;       // dataset name in the data map
  std::string init_from = "init";  // registry checkpoint to start from
  std::string teacher;        // registry checkpoint, required for kd_* stages
};

struct PipelineSpec {
  // Fresh-model initialization (the registry's "init" entry).
  std::uint64_t init_seed = 0;
  std::size_t vocab_size = 0;
  std::size_t hidden = 0;
  std::size_t out_dim = 128;  // linear transfer dim
  // Optional correlated-init of paired token rows (multilingual-pretraining
  // stand-in).
  std::vector<std::pair<int, int>> init_tie_pairs;
  double init_tie_noise = 1.0;
  std::uint64_t init_tie_seed = 0;

  std::vector<PipelineStage> stages;
};

/// Executes the stages in order. Stage outputs are registered under their
/// names and (when out_dir is non-empty) persisted as
/// `<out_dir>/<name>.ckpt`. The registry always starts with "init".
std::map<std::string, EncoderParams> run_pipeline(const PipelineSpec& spec,
                                                  const std::map<std::string, StageData>& data,
                                                  const std::string& out_dir = "",
                                                  std::ostream* log = nullptr);

}  // namespace clir
