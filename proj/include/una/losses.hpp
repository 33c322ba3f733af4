#pragma once

#include <span>
#include <vector>

#include "una/feedback.hpp"
#include "una/policy.hpp"
#include "una/reward.hpp"

namespace una {

// Pointwise comparison used when matching the implicit reward to an explicit
// one: on the reward scale directly, or after squashing both through the
// logistic function.
enum class CompareAs { RewardMse, ScoreMse };

// Squared error or cross-entropy between implicit score and binary target.
enum class DifferenceLoss { Mse, Bce };

// A response drawn from the current policy during online training. The draw
// is treated as a constant when differentiating: gradients flow only through
// the implicit reward of the fixed (prompt, response) pair.
struct SampledResponse {
  Prompt x;
  Response y;
};

// Every loss below returns the mean over the batch, the gradient with respect
// to the policy parameters, and per-record values in batch order. All of them
// require a frozen reference policy and at least one record, and reject
// records of the wrong feedback kind.

// Pairwise objective on the implicit-reward margin. Unshaped: mean negated
// margin. Shaped: logistic negative log-likelihood of the margin, which
// coincides with the direct preference objective below.
LossResult loss_una_pair(const Policy& pi, const Policy& ref, Beta beta,
                         std::span<const FeedbackRecord> batch, bool shaped);

// Direct preference optimization over log-probability ratios.
LossResult loss_dpo(const Policy& pi, const Policy& ref, Beta beta,
                    std::span<const FeedbackRecord> batch);

// Implicit score against a 0/1 target for undesired/desired responses.
LossResult loss_una_binary(const Policy& pi, const Policy& ref, Beta beta,
                           std::span<const FeedbackRecord> batch, DifferenceLoss g);

// Implicit score against a normalized scalar annotation.
LossResult loss_una_score(const Policy& pi, const Policy& ref, Beta beta,
                          std::span<const FeedbackRecord> batch, const ScoreBounds& bounds);

// Online reward matching: squared gap between implicit and explicit reward
// (or score) on responses drawn from the current policy.
LossResult loss_una_online(const Policy& pi, const Policy& ref, Beta beta,
                           const ExplicitRewardModel& rm,
                           std::span<const SampledResponse> batch, CompareAs compare_as);

}  // namespace una
