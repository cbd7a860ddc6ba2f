#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clir/align.hpp"
#include "clir/data.hpp"
#include "clir/encoder.hpp"
#include "clir/error.hpp"
#include "clir/eval.hpp"
#include "clir/index.hpp"
#include "clir/synthetic.hpp"
#include "clir/trainer.hpp"

namespace {

namespace fs = std::filesystem;

std::string g_provenance;

clir::Config load_cfg(const std::string& path) {
  if (path.empty()) return clir::Config::from_pairs({});
  return clir::Config::load(path);
}

std::size_t cfg_size(const clir::Config& cfg, const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(cfg.get_int(key, static_cast<std::int64_t>(fallback)));
}

struct TrainFlags {
  std::string config_path;
  std::string data_dir;
  std::string out_path;
  std::string checkpoint;
  std::string teacher_checkpoint;
  std::uint64_t seed = 0;
  double tau = 0.0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* tau_opt = nullptr;
};

void add_common(CLI::App* cmd, TrainFlags& f, bool out_required) {
  cmd->add_option("--config", f.config_path, "key = value configuration file");
  cmd->add_option("--data", f.data_dir, "directory with the generated TSV files")->required();
  auto* out = cmd->add_option("--out", f.out_path, "output checkpoint path");
  if (out_required) out->required();
  cmd->add_option("--checkpoint", f.checkpoint, "starting checkpoint (default: fresh init)");
  cmd->add_option("--teacher-checkpoint", f.teacher_checkpoint, "frozen teacher checkpoint");
  f.seed_opt = cmd->add_option("--seed", f.seed, "seed for init and batch order");
  f.tau_opt = cmd->add_option("--tau", f.tau, "softmax temperature");
}

std::size_t max_token_of(const std::vector<int>& tokens, std::size_t acc) {
  for (int t : tokens) {
    if (t >= 0 && static_cast<std::size_t>(t) + 1 > acc) acc = static_cast<std::size_t>(t) + 1;
  }
  return acc;
}

/// Smallest vocabulary covering every token id in the data directory.
std::size_t infer_vocab(const std::string& data_dir) {
  std::size_t vocab = 0;
  fs::path base(data_dir);
  if (fs::exists(base / "corpus.tsv")) {
    for (const auto& doc : clir::load_corpus((base / "corpus.tsv").string())) {
      vocab = max_token_of(doc.token_ids, vocab);
    }
  }
  for (const char* name : {"triples_teacher.tsv", "triples_cross.tsv"}) {
    if (!fs::exists(base / name)) continue;
    for (const auto& triple : clir::load_triples((base / name).string())) {
      vocab = max_token_of(triple.query_tokens, vocab);
      vocab = max_token_of(triple.query_tokens_teacher, vocab);
    }
  }
  if (fs::exists(base / "pairs.tsv")) {
    for (const auto& pair : clir::load_pairs((base / "pairs.tsv").string())) {
      vocab = max_token_of(pair.english_tokens, vocab);
      vocab = max_token_of(pair.non_english_tokens, vocab);
    }
  }
  if (fs::exists(base / "mapping.tsv")) {
    for (auto [src, dst] : clir::load_mapping((base / "mapping.tsv").string())) {
      vocab = max_token_of({src, dst}, vocab);
    }
  }
  if (vocab == 0) {
    throw clir::Error(clir::ErrorCode::InvalidSpec,
                      "cannot infer a vocabulary size from " + data_dir);
  }
  return vocab;
}

clir::EncoderParams starting_model(const TrainFlags& f, const clir::Config& cfg) {
  if (!f.checkpoint.empty()) return clir::load_checkpoint(f.checkpoint);
  std::size_t vocab = cfg_size(cfg, "vocab_size", 0);
  if (vocab == 0) vocab = infer_vocab(f.data_dir);
  std::size_t hidden = cfg_size(cfg, "hidden", 32);
  std::size_t out_dim = cfg_size(cfg, "out_dim", 128);
  std::uint64_t seed = f.seed_opt->count() > 0
                           ? f.seed
                           : static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  clir::EncoderParams params = clir::init_encoder(seed, vocab, hidden, out_dim);
  // Correlated initialization of translation-paired token rows stands in
  // for multilingual pretraining; the alignment stage depends on it.
  if (cfg.get_int("tie_init", 1) != 0) {
    fs::path mapping_path = fs::path(f.data_dir) / "mapping.tsv";
    if (fs::exists(mapping_path)) {
      clir::tie_token_rows(params, clir::load_mapping(mapping_path.string()),
                           cfg.get_double("tie_noise", 1.0),
                           static_cast<std::uint64_t>(cfg.get_int("tie_seed", 0)));
    }
  }
  return params;
}

clir::StageConfig stage_config(const TrainFlags& f, const clir::Config& cfg, clir::StageKind kind,
                               double default_lr, std::size_t default_epochs,
                               double default_tau) {
  clir::StageConfig sc;
  sc.kind = kind;
  sc.learning_rate = cfg.get_double("learning_rate", default_lr);
  sc.epochs = cfg_size(cfg, "epochs", default_epochs);
  sc.tau = f.tau_opt->count() > 0 ? f.tau : cfg.get_double("tau", default_tau);
  sc.batch_size = cfg_size(cfg, "batch_size", 192);
  sc.seed = f.seed_opt->count() > 0 ? f.seed
                                    : static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  sc.max_query_tokens = cfg_size(cfg, "max_query_tokens", 32);
  sc.max_doc_tokens = cfg_size(cfg, "max_doc_tokens", 180);
  return sc;
}

int run_train(const TrainFlags& f, clir::StageKind kind, const std::string& triples_file,
              double default_lr, std::size_t default_epochs, double default_tau,
              const std::string& stage_name) {
  clir::Config cfg = load_cfg(f.config_path);
  clir::EncoderParams model = starting_model(f, cfg);
  clir::StageConfig sc = stage_config(f, cfg, kind, default_lr, default_epochs, default_tau);

  clir::Corpus corpus;
  std::vector<clir::TripleRecord> triples;
  std::vector<clir::ParallelPair> pairs;
  clir::StageData data;
  fs::path base(f.data_dir);
  if (kind == clir::StageKind::kd_representation) {
    pairs = clir::load_pairs((base / "pairs.tsv").string());
    data.pairs = &pairs;
  } else {
    corpus = clir::load_corpus((base / "corpus.tsv").string());
    triples = clir::load_triples((base / triples_file).string());
    data.corpus = &corpus;
    data.triples = &triples;
  }

  clir::EncoderParams teacher;
  const clir::EncoderParams* teacher_ptr = nullptr;
  if (!f.teacher_checkpoint.empty()) {
    teacher = clir::load_checkpoint(f.teacher_checkpoint);
    teacher_ptr = &teacher;
  } else if (kind != clir::StageKind::finetune_triples) {
    std::cerr << "error: " << stage_name << " requires --teacher-checkpoint\n";
    return 1;
  }

  clir::EncoderParams trained = clir::run_stage(model, teacher_ptr, sc, data, &std::cout,
                                                stage_name);
  trained.lineage += " | " + g_provenance;
  clir::save_checkpoint(trained, f.out_path);
  std::cout << "wrote " << f.out_path << "\n";
  return 0;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

struct SystemRow {
  std::string name;
  std::string checkpoint;
  std::string index_path;
  bool teacher_queries = false;
};

std::vector<SystemRow> load_systems(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw clir::Error(clir::ErrorCode::IoError, "cannot open " + path);
  std::vector<SystemRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 4) {
      throw clir::Error(clir::ErrorCode::ParseError,
                        path + ":" + std::to_string(line_no) +
                            ": expected 4 fields (name, checkpoint, index, student|teacher)");
    }
    if (fields[3] != "student" && fields[3] != "teacher") {
      throw clir::Error(clir::ErrorCode::ParseError,
                        path + ":" + std::to_string(line_no) +
                            ": query field must be student or teacher, got " + fields[3]);
    }
    rows.push_back({fields[0], fields[1], fields[2], fields[3] == "teacher"});
  }
  if (rows.empty()) {
    throw clir::Error(clir::ErrorCode::EmptyInput, path + " lists no systems");
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) {
    if (i > 0) g_provenance += ' ';
    g_provenance += argv[i];
  }

  CLI::App app{"late-interaction cross-lingual retrieval toolkit"};
  app.require_subcommand(1);

  // gen-synthetic
  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen-synthetic", "generate a bilingual retrieval world");
  gen->add_option("--config", gen_config, "world configuration file");
  gen->add_option("--out", gen_out, "output directory")->required();
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "generation seed");
  gen->callback([&]() {
    clir::Config cfg = load_cfg(gen_config);
    clir::SyntheticWorldSpec spec;
    spec.english_vocab = cfg_size(cfg, "english_vocab", spec.english_vocab);
    spec.student_vocab = cfg_size(cfg, "student_vocab", spec.student_vocab);
    spec.mapping_noise = cfg.get_double("mapping_noise", spec.mapping_noise);
    spec.corpus_docs = cfg_size(cfg, "corpus_docs", spec.corpus_docs);
    spec.doc_len_min = cfg_size(cfg, "doc_len_min", spec.doc_len_min);
    spec.doc_len_max = cfg_size(cfg, "doc_len_max", spec.doc_len_max);
    spec.train_queries = cfg_size(cfg, "train_queries", spec.train_queries);
    spec.eval_queries = cfg_size(cfg, "eval_queries", spec.eval_queries);
    spec.positives_per_query = cfg_size(cfg, "positives_per_query", spec.positives_per_query);
    spec.negatives_per_query = cfg_size(cfg, "negatives_per_query", spec.negatives_per_query);
    spec.query_len_min = cfg_size(cfg, "query_len_min", spec.query_len_min);
    spec.query_len_max = cfg_size(cfg, "query_len_max", spec.query_len_max);
    spec.corruption_rate = cfg.get_double("corruption_rate", spec.corruption_rate);
    spec.parallel_pairs = cfg_size(cfg, "parallel_pairs", spec.parallel_pairs);
    spec.pair_len_min = cfg_size(cfg, "pair_len_min", spec.pair_len_min);
    spec.pair_len_max = cfg_size(cfg, "pair_len_max", spec.pair_len_max);
    spec.seed = gen_seed_opt->count() > 0 ? gen_seed
                                          : static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    clir::SyntheticWorld world = clir::gen_synthetic(spec);
    clir::write_world(world, gen_out, g_provenance);
    std::cout << "wrote " << world.corpus.size() << " docs, " << world.triples_teacher.size()
              << "+" << world.triples_cross.size() << " triples, " << world.pairs.size()
              << " pairs, " << world.eval_examples.size() << " eval queries to " << gen_out
              << "\n";
  });

  // training commands share the flag set
  TrainFlags teach_f, base_f, pc_f, xor_f;
  auto* teach = app.add_subcommand("train-teacher", "fine-tune on English triples");
  add_common(teach, teach_f, true);
  teach->callback([&]() {
    std::exit(run_train(teach_f, clir::StageKind::finetune_triples, "triples_teacher.tsv",
                        1.5e-6, 1, 0.0, "train-teacher"));
  });

  auto* base = app.add_subcommand("train-baseline", "fine-tune on student-language triples");
  add_common(base, base_f, true);
  base->callback([&]() {
    std::exit(run_train(base_f, clir::StageKind::finetune_triples, "triples_cross.tsv", 6e-6, 5,
                        0.0, "train-baseline"));
  });

  auto* pc = app.add_subcommand("distill-pc",
                                "representation distillation over parallel pairs");
  add_common(pc, pc_f, true);
  pc->callback([&]() {
    std::exit(run_train(pc_f, clir::StageKind::kd_representation, "", 4.8e-5, 2, 0.0,
                        "distill-pc"));
  });

  auto* xo = app.add_subcommand("distill-xor", "relevance distillation over retrieval triples");
  add_common(xo, xor_f, true);
  xo->callback([&]() {
    std::exit(run_train(xor_f, clir::StageKind::kd_relevance, "triples_cross.tsv", 6e-6, 5, 2.0,
                        "distill-xor"));
  });

  // index
  std::string idx_config, idx_checkpoint, idx_data, idx_out;
  auto* idx = app.add_subcommand("index", "embed a corpus for retrieval");
  idx->add_option("--config", idx_config, "configuration file");
  idx->add_option("--checkpoint", idx_checkpoint, "encoder checkpoint")->required();
  idx->add_option("--data", idx_data, "corpus TSV file or directory holding corpus.tsv")
      ->required();
  idx->add_option("--out", idx_out, "output index path")->required();
  idx->callback([&]() {
    clir::Config cfg = load_cfg(idx_config);
    fs::path data_path(idx_data);
    if (fs::is_directory(data_path)) data_path /= "corpus.tsv";
    clir::Corpus corpus = clir::load_corpus(data_path.string());
    clir::EncoderParams params = clir::load_checkpoint(idx_checkpoint);
    clir::RetrievalIndex index =
        clir::build_index(corpus, params, cfg_size(cfg, "max_doc_tokens", 180));
    index.set_provenance(g_provenance);
    clir::save_index(index, idx_out);
    std::cout << "indexed " << index.size() << " docs at dim " << index.dim() << " into "
              << idx_out << "\n";
  });

  // search
  std::string s_config, s_checkpoint, s_data, s_query;
  std::size_t s_k = 10;
  auto* sea = app.add_subcommand("search", "rank indexed documents for one query");
  sea->add_option("--config", s_config, "configuration file");
  sea->add_option("--checkpoint", s_checkpoint, "encoder checkpoint")->required();
  sea->add_option("--data", s_data, "index file")->required();
  sea->add_option("--query", s_query, "space-separated query token ids")->required();
  sea->add_option("--k", s_k, "number of results");
  sea->callback([&]() {
    clir::Config cfg = load_cfg(s_config);
    clir::RetrievalIndex index = clir::load_index(s_data);
    clir::EncoderParams params = clir::load_checkpoint(s_checkpoint);
    std::vector<int> tokens = clir::parse_token_ids(s_query, "--query");
    auto hits = clir::search_tokens(index, tokens, params, s_k,
                                    cfg_size(cfg, "max_query_tokens", 32));
    for (std::size_t i = 0; i < hits.size(); ++i) {
      std::cout << (i + 1) << "\t" << hits[i].doc_id << "\t" << hits[i].score << "\n";
    }
  });

  // eval
  std::string e_config, e_data, e_systems, e_checkpoint, e_index, e_out;
  std::size_t e_budget = 5000;
  bool e_teacher_queries = false;
  auto* ev = app.add_subcommand("eval", "report recall at a token budget");
  ev->add_option("--config", e_config, "configuration file");
  ev->add_option("--data", e_data, "eval TSV file or directory holding eval.tsv")->required();
  ev->add_option("--systems", e_systems,
                 "TSV manifest: name, checkpoint, index, student|teacher");
  ev->add_option("--checkpoint", e_checkpoint, "single-system checkpoint");
  ev->add_option("--index", e_index, "single-system index file");
  ev->add_option("--budget", e_budget, "token budget");
  ev->add_flag("--teacher-queries", e_teacher_queries,
               "score the English query side (single-system mode)");
  ev->add_option("--out", e_out, "also write the table to this file");
  ev->callback([&]() {
    fs::path data_path(e_data);
    if (fs::is_directory(data_path)) data_path /= "eval.tsv";
    std::vector<clir::EvalExample> examples = clir::load_eval_set(data_path.string());
    std::vector<SystemRow> systems;
    if (!e_systems.empty()) {
      systems = load_systems(e_systems);
    } else {
      if (e_checkpoint.empty() || e_index.empty()) {
        std::cerr << "error: eval needs --systems, or --checkpoint with --index\n";
        std::exit(1);
      }
      systems.push_back({"system", e_checkpoint, e_index, e_teacher_queries});
    }
    std::string table = "system\tR@" + std::to_string(e_budget) + "t\n";
    for (const SystemRow& row : systems) {
      clir::EncoderParams params = clir::load_checkpoint(row.checkpoint);
      clir::RetrievalIndex index = clir::load_index(row.index_path);
      double recall = clir::evaluate(index, params, examples, e_budget, row.teacher_queries);
      table += row.name + "\t" + clir::format_percent(recall) + "\n";
    }
    std::cout << table;
    if (!e_out.empty()) {
      std::ofstream out(e_out, std::ios::trunc);
      if (!out) throw clir::Error(clir::ErrorCode::IoError, "cannot open " + e_out);
      out << "# " << g_provenance << "\n" << table;
    }
  });

  // align
  std::string a_checkpoint, a_teacher, a_data, a_pair;
  auto* al = app.add_subcommand("align", "print the greedy alignment for one parallel pair");
  al->add_option("--checkpoint", a_checkpoint, "student encoder checkpoint")->required();
  al->add_option("--teacher-checkpoint", a_teacher,
                 "teacher encoder checkpoint (default: same as --checkpoint)");
  al->add_option("--data", a_data, "pairs TSV file or directory holding pairs.tsv")->required();
  al->add_option("--pair", a_pair, "pair_id to align (default: first pair)");
  al->callback([&]() {
    fs::path data_path(a_data);
    if (fs::is_directory(data_path)) data_path /= "pairs.tsv";
    std::vector<clir::ParallelPair> pairs = clir::load_pairs(data_path.string());
    const clir::ParallelPair* pair = &pairs.front();
    if (!a_pair.empty()) {
      auto it = std::find_if(pairs.begin(), pairs.end(),
                             [&](const clir::ParallelPair& p) { return p.pair_id == a_pair; });
      if (it == pairs.end()) {
        throw clir::Error(clir::ErrorCode::InvalidSpec, "no pair with id " + a_pair);
      }
      pair = &*it;
    }
    clir::EncoderParams student = clir::load_checkpoint(a_checkpoint);
    clir::EncoderParams teacher =
        a_teacher.empty() ? student : clir::load_checkpoint(a_teacher);
    clir::EmbeddingMatrix teacher_emb = clir::encode(pair->english_tokens, teacher);
    clir::EmbeddingMatrix student_emb = clir::encode(pair->non_english_tokens, student);
    clir::AlignmentPlan plan = clir::greedy_align(teacher_emb, student_emb);
    std::cout << "pair " << pair->pair_id << ": " << plan.teacher_tokens << " teacher tokens, "
              << plan.student_tokens << " student tokens\n";
    for (std::size_t m = 0; m < plan.matched_positions.size(); ++m) {
      std::size_t pos = plan.matched_positions[m];
      std::cout << "student_pos " << pos << " <- teacher_row " << plan.permutation[pos]
                << " (distance " << plan.matched_distance[m] << ")\n";
    }
    std::cout << "swaps:";
    for (auto [i, j] : plan.swaps) std::cout << " (" << i << "," << j << ")";
    std::cout << "\n";
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
