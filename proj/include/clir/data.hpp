#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace clir {

struct DocumentRecord {
  std::string doc_id;
  std::vector<int> token_ids;
  std::string surface_text;

  std::size_t token_count() const { return token_ids.size(); }
};

/// Document collection with unique ids, preserving file order.
class Corpus {
 public:
  void add(DocumentRecord doc);  // rejects duplicate doc_id
  const DocumentRecord* find(const std::string& doc_id) const;
  const DocumentRecord& operator[](std::size_t i) const { return docs_[i]; }
  std::size_t size() const { return docs_.size(); }
  auto begin() const { return docs_.begin(); }
  auto end() const { return docs_.end(); }

 private:
  std::vector<DocumentRecord> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// One <query, positive, negative> training instance. The teacher-language
/// query variant is optional; relevance distillation requires it.
struct TripleRecord {
  std::string query_id;
  std::vector<int> query_tokens;
  std::vector<int> query_tokens_teacher;  // empty = absent
  std::string positive_id;
  std::string negative_id;

  bool has_teacher_query() const { return !query_tokens_teacher.empty(); }
};

struct ParallelPair {
  std::string pair_id;
  std::vector<int> english_tokens;
  std::vector<int> non_english_tokens;
};

struct EvalExample {
  std::string query_id;
  std::vector<int> query_tokens;
  std::vector<int> query_tokens_teacher;  // empty = absent
  std::vector<std::string> gold_answers;
};

// Line-oriented tab-separated files, UTF-8, token ids as space-separated
// integers. '#' lines are comments; writers emit the run's provenance
// there. Loaders report malformed lines by number and reject duplicate
// primary ids.

void save_corpus(const std::string& path, const Corpus& corpus, const std::string& provenance);
Corpus load_corpus(const std::string& path);

void save_triples(const std::string& path, const std::vector<TripleRecord>& triples,
                  const std::string& provenance);
std::vector<TripleRecord> load_triples(const std::string& path);

void save_pairs(const std::string& path, const std::vector<ParallelPair>& pairs,
                const std::string& provenance);
std::vector<ParallelPair> load_pairs(const std::string& path);

void save_eval_set(const std::string& path, const std::vector<EvalExample>& examples,
                   const std::string& provenance);
std::vector<EvalExample> load_eval_set(const std::string& path);

void save_mapping(const std::string& path, const std::vector<std::pair<int, int>>& mapping,
                  const std::string& provenance);
std::vector<std::pair<int, int>> load_mapping(const std::string& path);

/// Flat `key = value` configuration file. Lookup precedence (command-line
/// flag over config over default) is applied by the callers.
class Config {
 public:
  static Config load(const std::string& path);
  static Config from_pairs(std::map<std::string, std::string> values);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::vector<int> parse_token_ids(const std::string& field, const std::string& context);
std::string format_token_ids(const std::vector<int>& tokens);

}  // namespace clir
