#include "una/feedback.hpp"

#include <cmath>

namespace una {

FeedbackRecord FeedbackRecord::pairwise(Prompt x, Response chosen, Response rejected) {
  if (chosen == rejected) throw ValidationError("pairwise record must compare two distinct responses");
  FeedbackRecord r;
  r.kind = FeedbackKind::Pairwise;
  r.x = std::move(x);
  r.chosen = std::move(chosen);
  r.rejected = std::move(rejected);
  return r;
}

FeedbackRecord FeedbackRecord::binary(Prompt x, Response response, BinaryLabel label) {
  FeedbackRecord r;
  r.kind = FeedbackKind::Binary;
  r.x = std::move(x);
  r.response = std::move(response);
  r.label = label;
  return r;
}

FeedbackRecord FeedbackRecord::scalar(Prompt x, Response response, double raw_score) {
  if (!std::isfinite(raw_score)) throw ValidationError("scalar record needs a finite raw score");
  FeedbackRecord r;
  r.kind = FeedbackKind::Scalar;
  r.x = std::move(x);
  r.response = std::move(response);
  r.raw_score = raw_score;
  return r;
}

}  // namespace una
