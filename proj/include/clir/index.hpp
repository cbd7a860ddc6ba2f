#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "clir/data.hpp"
#include "clir/encoder.hpp"
#include "clir/matrix.hpp"

namespace clir {

struct IndexEntry {
  DocumentRecord doc;
  EmbeddingMatrix embeddings;  // one row per kept token, L2-normalized
};

/// Exhaustive late-interaction index. Stores the per-token document
/// embeddings together with the source records so retrieval output can be
/// evaluated without the original corpus file.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  RetrievalIndex(std::size_t dim, std::uint64_t model_fingerprint);

  void add(DocumentRecord doc, EmbeddingMatrix embeddings);

  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }
  std::uint64_t model_fingerprint() const { return model_fingerprint_; }
  const IndexEntry& entry(std::size_t i) const { return entries_[i]; }
  const IndexEntry* find(const std::string& doc_id) const;

  /// Free-text header describing how the index was produced.
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string text) { provenance_ = std::move(text); }

 private:
  std::size_t dim_ = 0;
  std::uint64_t model_fingerprint_ = 0;
  std::string provenance_;
  std::vector<IndexEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

RetrievalIndex build_index(const Corpus& corpus, const EncoderParams& params,
                           std::size_t max_doc_tokens = 180);

void save_index(const RetrievalIndex& index, const std::string& path);
RetrievalIndex load_index(const std::string& path);

struct SearchHit {
  std::string doc_id;
  double score = 0.0;
};

/// Scores every indexed document against the query embeddings and returns
/// the top k, sorted by score descending with doc_id as the tiebreaker.
std::vector<SearchHit> search(const RetrievalIndex& index, const EmbeddingMatrix& query,
                              std::size_t k);

/// Encodes the query with `params` and searches. Refuses to run when the
/// index was built by a different model.
std::vector<SearchHit> search_tokens(const RetrievalIndex& index, const std::vector<int>& tokens,
                                     const EncoderParams& params, std::size_t k,
                                     std::size_t max_query_tokens = 32);

}  // namespace clir
