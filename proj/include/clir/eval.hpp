#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clir/data.hpp"
#include "clir/encoder.hpp"
#include "clir/index.hpp"

namespace clir {

/// Lowercases and collapses runs of whitespace to single spaces (leading
/// and trailing whitespace dropped). Both sides of answer matching go
/// through this.
std::string normalize_text(const std::string& text);

/// Recall at a token budget for one query: walk the ranked documents in
/// order, keeping whitespace-delimited surface tokens until `budget` are
/// accumulated (a document crossing the boundary is cut at token
/// granularity), then report 1 iff any gold answer occurs as a substring
/// of the kept text after normalization.
int recall_at_tokens(const std::vector<const DocumentRecord*>& ranked, const EvalExample& example,
                     std::size_t budget = 5000);

/// Mean recall_at_tokens over the examples, in [0,1]. Queries are encoded
/// with `params` and ranked against the full index. use_teacher_queries
/// selects the English-side token field (every example must carry it).
double evaluate(const RetrievalIndex& index, const EncoderParams& params,
                const std::vector<EvalExample>& examples, std::size_t budget = 5000,
                bool use_teacher_queries = false);

/// Formats a [0,1] fraction as a percentage with one decimal, e.g. 0.686
/// becomes "68.6".
std::string format_percent(double fraction);

}  // namespace clir
