#include "clir/eval.hpp"

#include <cctype>
#include <cstdio>

#include "clir/error.hpp"

namespace clir {

std::string normalize_text(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    unsigned char u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

namespace {

void append_tokens(const std::string& text, std::size_t budget, std::vector<std::string>& kept) {
  std::size_t i = 0;
  while (i < text.size() && kept.size() < budget) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) kept.push_back(text.substr(start, i - start));
  }
}

}  // namespace

int recall_at_tokens(const std::vector<const DocumentRecord*>& ranked, const EvalExample& example,
                     std::size_t budget) {
  if (ranked.empty()) throw Error(ErrorCode::EmptyInput, "recall_at_tokens needs a ranked list");
  if (example.gold_answers.empty()) {
    throw Error(ErrorCode::EmptyInput, "eval example " + example.query_id + " has no gold answers");
  }
  std::vector<std::string> kept;
  kept.reserve(budget);
  for (const DocumentRecord* doc : ranked) {
    if (kept.size() >= budget) break;
    append_tokens(doc->surface_text, budget, kept);
  }
  std::string haystack;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i > 0) haystack.push_back(' ');
    haystack += kept[i];
  }
  haystack = normalize_text(haystack);
  for (const std::string& answer : example.gold_answers) {
    std::string needle = normalize_text(answer);
    if (!needle.empty() && haystack.find(needle) != std::string::npos) return 1;
  }
  return 0;
}

double evaluate(const RetrievalIndex& index, const EncoderParams& params,
                const std::vector<EvalExample>& examples, std::size_t budget,
                bool use_teacher_queries) {
  if (examples.empty()) throw Error(ErrorCode::EmptyInput, "evaluate needs at least one example");
  std::size_t hits = 0;
  for (const EvalExample& example : examples) {
    const std::vector<int>& tokens =
        use_teacher_queries ? example.query_tokens_teacher : example.query_tokens;
    if (tokens.empty()) {
      throw Error(ErrorCode::MissingTeacher,
                  "eval example " + example.query_id + " lacks the requested query tokens");
    }
    std::vector<SearchHit> ranked = search_tokens(index, tokens, params, index.size());
    std::vector<const DocumentRecord*> docs;
    docs.reserve(ranked.size());
    for (const SearchHit& hit : ranked) docs.push_back(&index.find(hit.doc_id)->doc);
    hits += static_cast<std::size_t>(recall_at_tokens(docs, example, budget));
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
  return buf;
}

}  // namespace clir
