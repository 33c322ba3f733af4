#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "una/losses.hpp"
#include "una/policy.hpp"
#include "una/reward.hpp"

namespace una {

enum class LossKind {
  UnaPairShaped,
  UnaPairUnshaped,
  Dpo,
  UnaBinaryMse,
  UnaBinaryBce,
  UnaScore,
  UnaOnlineReward,
  UnaOnlineScore,
  PgBaseline,
  RmBt,
};

LossKind parse_loss_kind(const std::string& name);
std::string loss_kind_name(LossKind kind);

// How the policy-gradient baseline estimates the expected-reward gradient:
// score-function samples with a mean-reward baseline, or the enumerated
// expectation (useful when the run should follow the exact objective).
enum class PgEstimator { Sampled, Exact };

struct TrainConfig {
  Beta beta{};                  // 0.03
  double step_size = 0.05;
  uint64_t steps = 100;
  uint64_t batch_size = 64;
  uint64_t seed = 0;
  LossKind loss_kind = LossKind::UnaPairShaped;
  CompareAs compare_as = CompareAs::ScoreMse;
  std::optional<double> grad_norm_cap = 10.0;
  uint64_t eval_every = 10;
  ScoreBounds score_bounds{1.0, 5.0};
  PgEstimator pg_estimator = PgEstimator::Sampled;
  // When set, online runs also record the mean squared deviation of the
  // per-step gradient estimate from the enumerated expectation.
  bool track_grad_variance = false;

  void validate() const;
};

// One row of the metrics stream. Fields that do not apply to the run kind
// hold NaN. `ms` is written as zero so that identical (config, data, seed)
// runs serialize to identical bytes; wall-clock time lives in
// TrainReport::total_ms only.
struct EvalRecord {
  uint64_t step = 0;
  double loss = 0.0;
  double kl = 0.0;
  double mean_r_theta_w = 0.0;
  double mean_r_theta_l = 0.0;
  double mean_s_theta_w = 0.0;
  double mean_s_theta_l = 0.0;
  double mean_explicit_reward = 0.0;
  double ms = 0.0;
  double accuracy = 0.0;           // reward-model runs only
  double grad_est_sq_dev = 0.0;    // online runs with track_grad_variance
};

struct TrainReport {
  std::vector<EvalRecord> evals;
  std::optional<Policy> final_policy;
  double total_ms = 0.0;

  const EvalRecord& first() const { return evals.front(); }
  const EvalRecord& last() const { return evals.back(); }
};

// Offline alignment: seeded epoch-wise minibatch descent of the configured
// dataset loss. Evals happen at step 0, every eval_every steps, and at the
// final step, always over the full dataset.
TrainReport train_offline(const Policy& pi0, const Policy& ref, const TrainConfig& cfg,
                          std::span<const FeedbackRecord> data);

// Online alignment: each step samples batch_size (prompt, response) pairs
// from the current policy, scores them with the explicit reward model, and
// descends the reward-matching loss. Eval metrics are exact enumerated
// expectations, never sample estimates.
TrainReport train_online_una(const Policy& pi0, const Policy& ref, const TrainConfig& cfg,
                             std::span<const Prompt> prompts, const ExplicitRewardModel& rm);

// KL-regularized policy-gradient ascent on expected explicit reward, with the
// divergence gradient always computed exactly by enumeration. Shares the
// sampling streams and report schema with train_online_una so runs under the
// same config are directly comparable.
TrainReport train_policy_gradient_baseline(const Policy& pi0, const Policy& ref,
                                           const TrainConfig& cfg,
                                           std::span<const Prompt> prompts,
                                           const ExplicitRewardModel& rm);

// Bradley-Terry reward-model fitting on pairwise records. steps may be zero
// here (a null run that only evaluates).
std::pair<ExplicitRewardModel, TrainReport> train_reward_model(const ExplicitRewardModel& rm0,
                                                               const TrainConfig& cfg,
                                                               std::span<const FeedbackRecord> data);

// Fixed-header CSV (step,loss,kl,mean_r_theta_w,mean_r_theta_l,mean_s_theta_w,
// mean_s_theta_l,mean_explicit_reward,ms), one row per eval record.
void write_metrics_csv(const TrainReport& report, const std::string& path);

}  // namespace una
