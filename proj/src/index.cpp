#include "clir/index.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "clir/error.hpp"
#include "clir/maxsim.hpp"
#include "clir/rng.hpp"

namespace clir {

RetrievalIndex::RetrievalIndex(std::size_t dim, std::uint64_t model_fingerprint)
    : dim_(dim), model_fingerprint_(model_fingerprint) {
  if (dim == 0) throw Error(ErrorCode::InvalidSpec, "index dimension must be positive");
}

void RetrievalIndex::add(DocumentRecord doc, EmbeddingMatrix embeddings) {
  if (embeddings.matrix().cols() != dim_) {
    throw Error(ErrorCode::DimMismatch, "document " + doc.doc_id + " has embedding dim " +
                                            std::to_string(embeddings.matrix().cols()) +
                                            ", index expects " + std::to_string(dim_));
  }
  if (embeddings.matrix().rows() == 0) {
    throw Error(ErrorCode::EmptyInput, "document " + doc.doc_id + " has no token embeddings");
  }
  auto [it, inserted] = by_id_.emplace(doc.doc_id, entries_.size());
  if (!inserted) {
    throw Error(ErrorCode::InvalidSpec, "duplicate doc_id " + doc.doc_id + " in index");
  }
  entries_.push_back({std::move(doc), std::move(embeddings)});
}

const IndexEntry* RetrievalIndex::find(const std::string& doc_id) const {
  auto it = by_id_.find(doc_id);
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

RetrievalIndex build_index(const Corpus& corpus, const EncoderParams& params,
                           std::size_t max_doc_tokens) {
  if (corpus.size() == 0) throw Error(ErrorCode::EmptyInput, "cannot index an empty corpus");
  RetrievalIndex index(params.out_dim, fingerprint(params));
  for (const DocumentRecord& doc : corpus) {
    index.add(doc, encode(doc.token_ids, params, max_doc_tokens));
  }
  return index;
}

namespace {

constexpr char kIndexMagic[8] = {'C', 'L', 'I', 'R', 'I', 'D', 'X', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
}

void write_string(std::ostream& out, const std::string& s, std::uint64_t& hash) {
  std::uint64_t len = s.size();
  write_pod(out, len);
  out.write(s.data(), static_cast<std::streamsize>(len));
  hash = fnv1a64(s.data(), s.size(), hash);
}

std::string read_string(std::istream& in, std::uint64_t& hash) {
  std::uint64_t len = 0;
  read_pod(in, len);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  hash = fnv1a64(s.data(), s.size(), hash);
  return s;
}

}  // namespace

void save_index(const RetrievalIndex& index, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out.write(kIndexMagic, sizeof(kIndexMagic));
  std::uint32_t version = 1;
  write_pod(out, version);
  std::uint64_t dim = index.dim(), fp = index.model_fingerprint(), count = index.size();
  write_pod(out, dim);
  write_pod(out, fp);
  write_pod(out, count);
  std::uint64_t hash = fnv1a64(&dim, sizeof(dim));
  hash = fnv1a64(&fp, sizeof(fp), hash);
  write_string(out, index.provenance(), hash);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const IndexEntry& entry = index.entry(i);
    write_string(out, entry.doc.doc_id, hash);
    write_string(out, entry.doc.surface_text, hash);
    std::uint64_t token_count = entry.doc.token_ids.size();
    write_pod(out, token_count);
    for (int t : entry.doc.token_ids) {
      std::int32_t v = t;
      write_pod(out, v);
      hash = fnv1a64(&v, sizeof(v), hash);
    }
    std::uint64_t rows = entry.embeddings.matrix().rows();
    write_pod(out, rows);
    auto values = entry.embeddings.matrix().values();
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    hash = fnv1a64(values.data(), values.size() * sizeof(double), hash);
  }
  write_pod(out, hash);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

RetrievalIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kIndexMagic, sizeof(magic)) != 0)
    throw Error(ErrorCode::ParseError, path + " is not an index file");
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != 1)
    throw Error(ErrorCode::ParseError, "unsupported index version " + std::to_string(version));
  std::uint64_t dim = 0, fp = 0, count = 0;
  read_pod(in, dim);
  read_pod(in, fp);
  read_pod(in, count);
  if (!in || dim == 0) throw Error(ErrorCode::ParseError, "corrupt index header in " + path);
  std::uint64_t hash = fnv1a64(&dim, sizeof(dim));
  hash = fnv1a64(&fp, sizeof(fp), hash);
  RetrievalIndex index(dim, fp);
  index.set_provenance(read_string(in, hash));
  for (std::uint64_t i = 0; i < count; ++i) {
    DocumentRecord doc;
    doc.doc_id = read_string(in, hash);
    doc.surface_text = read_string(in, hash);
    std::uint64_t token_count = 0;
    read_pod(in, token_count);
    doc.token_ids.reserve(token_count);
    for (std::uint64_t t = 0; t < token_count; ++t) {
      std::int32_t v = 0;
      read_pod(in, v);
      hash = fnv1a64(&v, sizeof(v), hash);
      doc.token_ids.push_back(v);
    }
    std::uint64_t rows = 0;
    read_pod(in, rows);
    Matrix emb(rows, dim);
    auto values = emb.values();
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    hash = fnv1a64(values.data(), values.size() * sizeof(double), hash);
    if (!in) throw Error(ErrorCode::ParseError, "truncated index " + path);
    index.add(std::move(doc), EmbeddingMatrix(std::move(emb), true));
  }
  std::uint64_t stored_hash = 0;
  read_pod(in, stored_hash);
  if (!in) throw Error(ErrorCode::ParseError, "truncated index " + path);
  if (stored_hash != hash) throw Error(ErrorCode::ParseError, "index hash mismatch in " + path);
  return index;
}

std::vector<SearchHit> search(const RetrievalIndex& index, const EmbeddingMatrix& query,
                              std::size_t k) {
  if (index.size() == 0) throw Error(ErrorCode::EmptyIndex, "search over an empty index");
  if (k == 0) throw Error(ErrorCode::EmptyInput, "search needs k >= 1");
  std::vector<SearchHit> hits;
  hits.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const IndexEntry& entry = index.entry(i);
    auto [score, trace] = maxsim_score(query, entry.embeddings);
    hits.push_back({entry.doc.doc_id, score.value});
  }
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

std::vector<SearchHit> search_tokens(const RetrievalIndex& index, const std::vector<int>& tokens,
                                     const EncoderParams& params, std::size_t k,
                                     std::size_t max_query_tokens) {
  if (fingerprint(params) != index.model_fingerprint()) {
    throw Error(ErrorCode::FingerprintMismatch,
                "index was built with a different model than the query encoder");
  }
  return search(index, encode(tokens, params, max_query_tokens), k);
}

}  // namespace clir
