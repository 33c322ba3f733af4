#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "una/feedback.hpp"
#include "una/reward.hpp"

namespace una {

// A validated feedback file: records in file order, per-kind counts, the
// score bounds they were checked against, and a hash of the canonical
// serialization. Ingesting the same content always yields the same hash.
struct Dataset {
  std::vector<FeedbackRecord> records;
  size_t num_pairwise = 0;
  size_t num_binary = 0;
  size_t num_scalar = 0;
  ScoreBounds bounds;
  uint64_t content_hash = 0;
};

struct IngestOptions {
  ScoreBounds bounds{1.0, 5.0};
  // When set, every response is validated against this vocab; otherwise only
  // the terminator shape is checked.
  std::optional<Vocab> vocab;
};

// Parse one line-delimited JSON record file. Lines hold one object each:
//   {"kind":"pairwise","prompt":int,"chosen":[int...],"rejected":[int...]}
//   {"kind":"binary","prompt":int,"response":[int...],"label":"desired"|"undesired"}
//   {"kind":"scalar","prompt":int,"response":[int...],"raw_score":float}
// Mixed kinds are allowed. Errors carry the 1-based line number.
Dataset ingest(const std::string& path, const IngestOptions& opts = {});

// Same validation and hashing for records already in memory.
Dataset dataset_from_records(std::vector<FeedbackRecord> records, const IngestOptions& opts = {});

// One compact JSON object per line, keys sorted; the form content_hash is
// computed over, and a fixpoint of ingest.
std::string canonical_serialization(const Dataset& d);

void write_dataset(const Dataset& d, const std::string& path);

// Prompts appearing in the dataset, one per distinct id, sorted by id.
std::vector<Prompt> unique_prompts(const Dataset& d);

uint64_t fnv1a64(std::string_view text);

}  // namespace una
