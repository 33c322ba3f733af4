#include "una/losses.hpp"

#include <algorithm>
#include <cmath>

namespace una {

namespace {

void require_nonempty(size_t n) {
  if (n == 0) throw EmptyBatch("loss needs at least one record");
}

void require_kind(const FeedbackRecord& rec, FeedbackKind want, const char* what) {
  if (rec.kind != want) throw WrongFeedbackKind(std::string(what) + " records required");
}

}  // namespace

LossResult loss_una_pair(const Policy& pi, const Policy& ref, Beta beta,
                         std::span<const FeedbackRecord> batch, bool shaped) {
  require_nonempty(batch.size());
  LossResult out;
  out.grad.assign(pi.param_count(), 0.0);
  out.per_record.reserve(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const FeedbackRecord& rec : batch) {
    require_kind(rec, FeedbackKind::Pairwise, "pairwise");
    const double r_w = implicit_reward(pi, ref, beta, rec.x, rec.chosen);
    const double r_l = implicit_reward(pi, ref, beta, rec.x, rec.rejected);
    const double margin = r_w - r_l;
    double value, dmargin;
    if (shaped) {
      value = -log_sigmoid(margin);
      dmargin = -sigmoid(-margin);
    } else {
      value = -margin;
      dmargin = -1.0;
    }
    out.per_record.push_back(value);
    out.value += value * inv_n;
    const double coeff = dmargin * beta.value * inv_n;
    pi.accumulate_log_prob_grad(rec.x, rec.chosen, coeff, out.grad);
    pi.accumulate_log_prob_grad(rec.x, rec.rejected, -coeff, out.grad);
  }
  return out;
}

LossResult loss_dpo(const Policy& pi, const Policy& ref, Beta beta,
                    std::span<const FeedbackRecord> batch) {
  require_nonempty(batch.size());
  beta.validate();
  if (!ref.frozen()) throw NonFrozenReference("reference policy must be frozen");
  LossResult out;
  out.grad.assign(pi.param_count(), 0.0);
  out.per_record.reserve(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const FeedbackRecord& rec : batch) {
    require_kind(rec, FeedbackKind::Pairwise, "pairwise");
    const double ratio_w = beta.value * (pi.log_prob(rec.x, rec.chosen) - ref.log_prob(rec.x, rec.chosen));
    const double ratio_l = beta.value * (pi.log_prob(rec.x, rec.rejected) - ref.log_prob(rec.x, rec.rejected));
    const double margin = ratio_w - ratio_l;
    const double value = -log_sigmoid(margin);
    out.per_record.push_back(value);
    out.value += value * inv_n;
    const double coeff = -sigmoid(-margin) * beta.value * inv_n;
    pi.accumulate_log_prob_grad(rec.x, rec.chosen, coeff, out.grad);
    pi.accumulate_log_prob_grad(rec.x, rec.rejected, -coeff, out.grad);
  }
  return out;
}

LossResult loss_una_binary(const Policy& pi, const Policy& ref, Beta beta,
                           std::span<const FeedbackRecord> batch, DifferenceLoss g) {
  require_nonempty(batch.size());
  LossResult out;
  out.grad.assign(pi.param_count(), 0.0);
  out.per_record.reserve(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const FeedbackRecord& rec : batch) {
    require_kind(rec, FeedbackKind::Binary, "binary");
    const double target = rec.label == BinaryLabel::Desired ? 1.0 : 0.0;
    const double r = implicit_reward(pi, ref, beta, rec.x, rec.response);
    const double s = sigmoid(r);
    double value, dr;
    if (g == DifferenceLoss::Mse) {
      value = (s - target) * (s - target);
      dr = 2.0 * (s - target) * s * (1.0 - s);
    } else {
      // clamp to the strict interior so neither log argument can reach 0;
      // inside the clamp the value is locally constant, so the gradient is 0
      const double s_c = std::clamp(s, 1e-12, 1.0 - 1e-12);
      value = -(target * std::log(s_c) + (1.0 - target) * std::log(1.0 - s_c));
      dr = s == s_c ? s - target : 0.0;
    }
    out.per_record.push_back(value);
    out.value += value * inv_n;
    pi.accumulate_log_prob_grad(rec.x, rec.response, dr * beta.value * inv_n, out.grad);
  }
  return out;
}

LossResult loss_una_score(const Policy& pi, const Policy& ref, Beta beta,
                          std::span<const FeedbackRecord> batch, const ScoreBounds& bounds) {
  require_nonempty(batch.size());
  LossResult out;
  out.grad.assign(pi.param_count(), 0.0);
  out.per_record.reserve(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const FeedbackRecord& rec : batch) {
    require_kind(rec, FeedbackKind::Scalar, "scalar");
    const double target = normalize_score(rec.raw_score, bounds);
    const double r = implicit_reward(pi, ref, beta, rec.x, rec.response);
    const double s = sigmoid(r);
    const double value = (s - target) * (s - target);
    out.per_record.push_back(value);
    out.value += value * inv_n;
    const double dr = 2.0 * (s - target) * s * (1.0 - s);
    pi.accumulate_log_prob_grad(rec.x, rec.response, dr * beta.value * inv_n, out.grad);
  }
  return out;
}

LossResult loss_una_online(const Policy& pi, const Policy& ref, Beta beta,
                           const ExplicitRewardModel& rm,
                           std::span<const SampledResponse> batch, CompareAs compare_as) {
  require_nonempty(batch.size());
  LossResult out;
  out.grad.assign(pi.param_count(), 0.0);
  out.per_record.reserve(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const SampledResponse& draw : batch) {
    const double r_theta = implicit_reward(pi, ref, beta, draw.x, draw.y);
    const double r_phi = rm.reward(draw.x, draw.y);
    if (!std::isfinite(r_phi)) throw NonFiniteReward("explicit reward is not finite");
    double value, dr;
    if (compare_as == CompareAs::RewardMse) {
      const double gap = r_theta - r_phi;
      value = gap * gap;
      dr = 2.0 * gap;
    } else {
      const double s_theta = sigmoid(r_theta);
      const double gap = s_theta - sigmoid(r_phi);
      value = gap * gap;
      dr = 2.0 * gap * s_theta * (1.0 - s_theta);
    }
    out.per_record.push_back(value);
    out.value += value * inv_n;
    pi.accumulate_log_prob_grad(draw.x, draw.y, dr * beta.value * inv_n, out.grad);
  }
  return out;
}

}  // namespace una
