#include "clir/data.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "clir/error.hpp"

namespace clir {

void Corpus::add(DocumentRecord doc) {
  if (by_id_.count(doc.doc_id))
    throw Error(ErrorCode::ParseError, "duplicate doc_id " + doc.doc_id);
  by_id_.emplace(doc.doc_id, docs_.size());
  docs_.push_back(std::move(doc));
}

const DocumentRecord* Corpus::find(const std::string& doc_id) const {
  auto it = by_id_.find(doc_id);
  return it == by_id_.end() ? nullptr : &docs_[it->second];
}

std::vector<int> parse_token_ids(const std::string& field, const std::string& context) {
  std::vector<int> tokens;
  const char* p = field.data();
  const char* end = p + field.size();
  while (p < end) {
    while (p < end && *p == ' ') ++p;
    if (p == end) break;
    int value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc() || (next < end && *next != ' '))
      throw Error(ErrorCode::ParseError, context + ": bad token id near '" +
                                             std::string(p, std::min<std::size_t>(end - p, 12)) + "'");
    tokens.push_back(value);
    p = next;
  }
  return tokens;
}

std::string format_token_ids(const std::vector<int>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(tokens[i]);
  }
  return out;
}

namespace {

void check_tsv_safe(const std::string& text, const std::string& what) {
  if (text.find('\t') != std::string::npos || text.find('\n') != std::string::npos)
    throw Error(ErrorCode::InvalidSpec, what + " may not contain tabs or newlines");
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  return out;
}

void write_provenance(std::ofstream& out, const std::string& provenance) {
  if (provenance.empty()) return;
  std::istringstream lines(provenance);
  std::string line;
  while (std::getline(lines, line)) out << "# " << line << "\n";
}

// Calls fn(line_number, fields) for every non-comment, non-blank line.
template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    fn(line_no, split_tabs(line));
  }
}

std::string at(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

void require_fields(const std::string& path, std::size_t line_no,
                    const std::vector<std::string>& fields, std::size_t expected) {
  if (fields.size() != expected)
    throw Error(ErrorCode::ParseError, at(path, line_no) + ": expected " +
                                           std::to_string(expected) + " tab-separated fields, got " +
                                           std::to_string(fields.size()));
}

}  // namespace

void save_corpus(const std::string& path, const Corpus& corpus, const std::string& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  for (const auto& doc : corpus) {
    check_tsv_safe(doc.surface_text, "surface text of " + doc.doc_id);
    check_tsv_safe(doc.doc_id, "doc_id");
    out << doc.doc_id << '\t' << format_token_ids(doc.token_ids) << '\t' << doc.surface_text
        << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

Corpus load_corpus(const std::string& path) {
  Corpus corpus;
  for_each_record(path, [&](std::size_t line_no, const std::vector<std::string>& fields) {
    require_fields(path, line_no, fields, 3);
    DocumentRecord doc;
    doc.doc_id = fields[0];
    doc.token_ids = parse_token_ids(fields[1], at(path, line_no));
    doc.surface_text = fields[2];
    if (doc.doc_id.empty())
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": empty doc_id");
    if (doc.token_ids.empty())
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": document has no tokens");
    try {
      corpus.add(std::move(doc));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": " + e.what());
    }
  });
  return corpus;
}

void save_triples(const std::string& path, const std::vector<TripleRecord>& triples,
                  const std::string& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  for (const auto& t : triples)
    out << t.query_id << '\t' << format_token_ids(t.query_tokens) << '\t'
        << format_token_ids(t.query_tokens_teacher) << '\t' << t.positive_id << '\t'
        << t.negative_id << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::vector<TripleRecord> load_triples(const std::string& path) {
  std::vector<TripleRecord> triples;
  for_each_record(path, [&](std::size_t line_no, const std::vector<std::string>& fields) {
    require_fields(path, line_no, fields, 5);
    TripleRecord t;
    t.query_id = fields[0];
    t.query_tokens = parse_token_ids(fields[1], at(path, line_no));
    t.query_tokens_teacher = parse_token_ids(fields[2], at(path, line_no));
    t.positive_id = fields[3];
    t.negative_id = fields[4];
    if (t.query_tokens.empty())
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": query has no tokens");
    if (t.positive_id.empty() || t.negative_id.empty())
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": missing document id");
    triples.push_back(std::move(t));
  });
  return triples;
}

void save_pairs(const std::string& path, const std::vector<ParallelPair>& pairs,
                const std::string& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  for (const auto& p : pairs)
    out << p.pair_id << '\t' << format_token_ids(p.english_tokens) << '\t'
        << format_token_ids(p.non_english_tokens) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::vector<ParallelPair> load_pairs(const std::string& path) {
  std::vector<ParallelPair> pairs;
  std::unordered_map<std::string, bool> seen;
  for_each_record(path, [&](std::size_t line_no, const std::vector<std::string>& fields) {
    require_fields(path, line_no, fields, 3);
    ParallelPair p;
    p.pair_id = fields[0];
    p.english_tokens = parse_token_ids(fields[1], at(path, line_no));
    p.non_english_tokens = parse_token_ids(fields[2], at(path, line_no));
    if (p.english_tokens.empty() || p.non_english_tokens.empty())
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": both pair sides must be non-empty");
    if (seen.count(p.pair_id))
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": duplicate pair_id " + p.pair_id);
    seen.emplace(p.pair_id, true);
    pairs.push_back(std::move(p));
  });
  return pairs;
}

void save_eval_set(const std::string& path, const std::vector<EvalExample>& examples,
                   const std::string& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  for (const auto& e : examples) {
    out << e.query_id << '\t' << format_token_ids(e.query_tokens) << '\t'
        << format_token_ids(e.query_tokens_teacher);
    for (const auto& answer : e.gold_answers) {
      check_tsv_safe(answer, "gold answer of " + e.query_id);
      out << '\t' << answer;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::vector<EvalExample> load_eval_set(const std::string& path) {
  std::vector<EvalExample> examples;
  std::unordered_map<std::string, bool> seen;
  for_each_record(path, [&](std::size_t line_no, const std::vector<std::string>& fields) {
    if (fields.size() < 4)
      throw Error(ErrorCode::ParseError,
                  at(path, line_no) + ": expected at least 4 fields (id, tokens, teacher tokens, answer)");
    EvalExample e;
    e.query_id = fields[0];
    e.query_tokens = parse_token_ids(fields[1], at(path, line_no));
    e.query_tokens_teacher = parse_token_ids(fields[2], at(path, line_no));
    e.gold_answers.assign(fields.begin() + 3, fields.end());
    if (e.query_tokens.empty())
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": query has no tokens");
    for (const auto& a : e.gold_answers)
      if (a.empty()) throw Error(ErrorCode::ParseError, at(path, line_no) + ": empty gold answer");
    if (seen.count(e.query_id))
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": duplicate query_id " + e.query_id);
    seen.emplace(e.query_id, true);
    examples.push_back(std::move(e));
  });
  return examples;
}

void save_mapping(const std::string& path, const std::vector<std::pair<int, int>>& mapping,
                  const std::string& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  for (auto [src, dst] : mapping) out << src << '\t' << dst << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::vector<std::pair<int, int>> load_mapping(const std::string& path) {
  std::vector<std::pair<int, int>> mapping;
  std::unordered_map<int, bool> seen;
  for_each_record(path, [&](std::size_t line_no, const std::vector<std::string>& fields) {
    require_fields(path, line_no, fields, 2);
    auto src = parse_token_ids(fields[0], at(path, line_no));
    auto dst = parse_token_ids(fields[1], at(path, line_no));
    if (src.size() != 1 || dst.size() != 1)
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": expected one id per side");
    if (seen.count(src[0]))
      throw Error(ErrorCode::ParseError,
                  at(path, line_no) + ": duplicate source id " + std::to_string(src[0]));
    seen.emplace(src[0], true);
    mapping.emplace_back(src[0], dst[0]);
  });
  return mapping;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  Config config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": expected key = value");
    auto trim = [](std::string s) {
      std::size_t b = s.find_first_not_of(" \t");
      std::size_t e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw Error(ErrorCode::ParseError, at(path, line_no) + ": empty key");
    config.values_[key] = value;
  }
  return config;
}

Config Config::from_pairs(std::map<std::string, std::string> values) {
  Config config;
  config.values_ = std::move(values);
  return config;
}

std::optional<std::string> Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto v = get(key);
  return v ? *v : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    return std::stod(*v);
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "config key " + key + ": not a number: " + *v);
  }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    auto out = std::stoll(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "config key " + key + ": not an integer: " + *v);
  }
}

}  // namespace clir
