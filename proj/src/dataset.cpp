#include "una/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "vendor/json.hpp"

namespace una {

namespace {

std::string at_line(size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

std::vector<uint32_t> token_array(const nlohmann::json& j, const char* field, size_t line) {
  if (!j.contains(field) || !j[field].is_array()) {
    throw SchemaError(at_line(line, std::string("\"") + field + "\" must be an array of token ids"));
  }
  std::vector<uint32_t> tokens;
  for (const auto& t : j[field]) {
    if (!t.is_number_unsigned()) {
      throw SchemaError(at_line(line, std::string("\"") + field + "\" must contain non-negative integers"));
    }
    tokens.push_back(t.get<uint32_t>());
  }
  return tokens;
}

Response parse_response(const nlohmann::json& j, const char* field, size_t line,
                        const std::optional<Vocab>& vocab) {
  Response y{token_array(j, field, line)};
  try {
    if (vocab) {
      validate_response(*vocab, y);
    } else {
      // without a vocab, check the terminator shape against an unbounded one
      if (y.tokens.empty()) throw MalformedResponse("response has no tokens");
      if (y.tokens.back() != kEndOfSequence) throw MalformedResponse("response does not end with the terminator");
      for (size_t i = 0; i + 1 < y.tokens.size(); ++i) {
        if (y.tokens[i] == kEndOfSequence) throw MalformedResponse("terminator appears before the final position");
      }
    }
  } catch (const MalformedResponse& e) {
    throw SchemaError(at_line(line, std::string("\"") + field + "\": " + e.what()));
  }
  return y;
}

uint32_t parse_prompt_id(const nlohmann::json& j, size_t line) {
  if (!j.contains("prompt") || !j["prompt"].is_number_unsigned()) {
    throw SchemaError(at_line(line, "\"prompt\" must be a non-negative integer"));
  }
  return j["prompt"].get<uint32_t>();
}

FeedbackRecord parse_record(const nlohmann::json& j, size_t line, const IngestOptions& opts) {
  if (!j.is_object()) throw SchemaError(at_line(line, "record must be a JSON object"));
  if (!j.contains("kind") || !j["kind"].is_string()) {
    throw SchemaError(at_line(line, "\"kind\" must be one of pairwise, binary, scalar"));
  }
  const std::string kind = j["kind"].get<std::string>();
  const Prompt x{parse_prompt_id(j, line), {}};
  if (kind == "pairwise") {
    Response chosen = parse_response(j, "chosen", line, opts.vocab);
    Response rejected = parse_response(j, "rejected", line, opts.vocab);
    if (chosen == rejected) throw SchemaError(at_line(line, "chosen and rejected must differ"));
    return FeedbackRecord::pairwise(x, std::move(chosen), std::move(rejected));
  }
  if (kind == "binary") {
    Response y = parse_response(j, "response", line, opts.vocab);
    if (!j.contains("label") || !j["label"].is_string()) {
      throw SchemaError(at_line(line, "\"label\" must be \"desired\" or \"undesired\""));
    }
    const std::string label = j["label"].get<std::string>();
    if (label != "desired" && label != "undesired") {
      throw SchemaError(at_line(line, "\"label\" must be \"desired\" or \"undesired\""));
    }
    return FeedbackRecord::binary(x, std::move(y),
                                  label == "desired" ? BinaryLabel::Desired : BinaryLabel::Undesired);
  }
  if (kind == "scalar") {
    Response y = parse_response(j, "response", line, opts.vocab);
    if (!j.contains("raw_score") || !j["raw_score"].is_number()) {
      throw SchemaError(at_line(line, "\"raw_score\" must be a number"));
    }
    const double raw = j["raw_score"].get<double>();
    opts.bounds.validate();
    if (!std::isfinite(raw) || raw < opts.bounds.min_raw || raw > opts.bounds.max_raw) {
      throw OutOfRange(at_line(line, "raw_score outside configured bounds"));
    }
    return FeedbackRecord::scalar(x, std::move(y), raw);
  }
  throw SchemaError(at_line(line, "unknown kind \"" + kind + "\""));
}

nlohmann::json record_to_json(const FeedbackRecord& rec) {
  nlohmann::json j;
  switch (rec.kind) {
    case FeedbackKind::Pairwise:
      j["kind"] = "pairwise";
      j["prompt"] = rec.x.id;
      j["chosen"] = rec.chosen.tokens;
      j["rejected"] = rec.rejected.tokens;
      break;
    case FeedbackKind::Binary:
      j["kind"] = "binary";
      j["prompt"] = rec.x.id;
      j["response"] = rec.response.tokens;
      j["label"] = rec.label == BinaryLabel::Desired ? "desired" : "undesired";
      break;
    case FeedbackKind::Scalar:
      j["kind"] = "scalar";
      j["prompt"] = rec.x.id;
      j["response"] = rec.response.tokens;
      j["raw_score"] = rec.raw_score;
      break;
  }
  return j;
}

Dataset finish(std::vector<FeedbackRecord> records, const IngestOptions& opts) {
  Dataset d;
  d.records = std::move(records);
  d.bounds = opts.bounds;
  for (const FeedbackRecord& rec : d.records) {
    switch (rec.kind) {
      case FeedbackKind::Pairwise: ++d.num_pairwise; break;
      case FeedbackKind::Binary: ++d.num_binary; break;
      case FeedbackKind::Scalar: ++d.num_scalar; break;
    }
  }
  d.content_hash = fnv1a64(canonical_serialization(d));
  return d;
}

}  // namespace

Dataset ingest(const std::string& path, const IngestOptions& opts) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open dataset: " + path);
  std::vector<FeedbackRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(at_line(line_no, e.what()));
    }
    records.push_back(parse_record(j, line_no, opts));
  }
  if (records.empty()) throw EmptyFile("dataset has no records: " + path);
  return finish(std::move(records), opts);
}

Dataset dataset_from_records(std::vector<FeedbackRecord> records, const IngestOptions& opts) {
  if (records.empty()) throw EmptyFile("dataset has no records");
  opts.bounds.validate();
  for (size_t i = 0; i < records.size(); ++i) {
    const FeedbackRecord& rec = records[i];
    if (rec.kind == FeedbackKind::Scalar &&
        (rec.raw_score < opts.bounds.min_raw || rec.raw_score > opts.bounds.max_raw)) {
      throw OutOfRange("record " + std::to_string(i) + ": raw_score outside configured bounds");
    }
    if (opts.vocab) {
      if (rec.kind == FeedbackKind::Pairwise) {
        validate_response(*opts.vocab, rec.chosen);
        validate_response(*opts.vocab, rec.rejected);
      } else {
        validate_response(*opts.vocab, rec.response);
      }
    }
  }
  return finish(std::move(records), opts);
}

std::string canonical_serialization(const Dataset& d) {
  std::string out;
  for (const FeedbackRecord& rec : d.records) {
    out += record_to_json(rec).dump();
    out += '\n';
  }
  return out;
}

void write_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw MissingArtifact("cannot open dataset for writing: " + path);
  out << canonical_serialization(d);
  if (!out) throw MissingArtifact("failed while writing dataset: " + path);
}

std::vector<Prompt> unique_prompts(const Dataset& d) {
  std::set<uint32_t> ids;
  for (const FeedbackRecord& rec : d.records) ids.insert(rec.x.id);
  std::vector<Prompt> prompts;
  prompts.reserve(ids.size());
  for (uint32_t id : ids) prompts.push_back(Prompt{id, {}});
  return prompts;
}

uint64_t fnv1a64(std::string_view text) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace una
