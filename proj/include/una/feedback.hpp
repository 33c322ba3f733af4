#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "una/errors.hpp"
#include "una/policy.hpp"

namespace una {

enum class FeedbackKind { Pairwise, Binary, Scalar };

enum class BinaryLabel : uint8_t { Undesired = 0, Desired = 1 };

// One supervision record. Exactly one of the three shapes is populated,
// selected by `kind`; the factory functions keep the shapes consistent.
struct FeedbackRecord {
  FeedbackKind kind = FeedbackKind::Pairwise;
  Prompt x;

  // pairwise
  Response chosen;
  Response rejected;

  // binary and scalar
  Response response;
  BinaryLabel label = BinaryLabel::Undesired;
  double raw_score = 0.0;

  static FeedbackRecord pairwise(Prompt x, Response chosen, Response rejected);
  static FeedbackRecord binary(Prompt x, Response response, BinaryLabel label);
  static FeedbackRecord scalar(Prompt x, Response response, double raw_score);
};

// Value plus gradient of a batch loss. `grad` is with respect to the
// parameters of whichever model the loss differentiates (policy or explicit
// reward model); `per_record` holds each record's contribution before
// averaging.
struct LossResult {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> per_record;
};

}  // namespace una
