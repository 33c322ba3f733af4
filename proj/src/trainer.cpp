#include "una/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "una/rng.hpp"

namespace una {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// stream for deriving the per-draw seed handed to Policy::sample
constexpr uint64_t kStreamResponseSeed = 6;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void cap_gradient(std::vector<double>& g, const std::optional<double>& cap) {
  if (!cap) return;
  double norm_sq = 0.0;
  for (double v : g) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  if (norm > *cap) {
    const double scale = *cap / norm;
    for (double& v : g) v *= scale;
  }
}

void require_policy_pair(const Policy& pi0, const Policy& ref) {
  if (pi0.frozen()) throw FrozenPolicy("initial policy must not be frozen");
  if (!ref.frozen()) throw NonFrozenReference("reference policy must be frozen");
  if (!(pi0.vocab() == ref.vocab())) throw VocabMismatch("policy and reference use different vocabs");
}

std::shared_ptr<const ResponseSet> enumeration_for(const Policy& pi) {
  if (pi.kind() == Policy::Kind::Tabular) return pi.response_set();
  return ResponseSet::enumerate_all(pi.vocab());
}

double mean_kl(const Policy& pi, const Policy& ref, std::span<const Prompt> prompts) {
  double total = 0.0;
  for (const Prompt& x : prompts) total += kl_divergence(pi, ref, x);
  return total / static_cast<double>(prompts.size());
}

// Epoch-wise shuffled minibatch cursor. Each epoch is a fresh seeded
// Fisher-Yates permutation; batches never mix epochs, so the tail batch of
// an epoch may be smaller than batch_size.
class BatchCursor {
 public:
  BatchCursor(size_t n, uint64_t seed) : perm_(n), seed_(seed), cursor_(n) {
    std::iota(perm_.begin(), perm_.end(), size_t{0});
  }

  std::span<const size_t> next(size_t batch_size) {
    const size_t n = perm_.size();
    if (cursor_ == n) {
      for (size_t i = n - 1, c = 0; i > 0; --i, ++c) {
        const uint64_t r = rng::at(seed_, rng::kStreamShuffle, epoch_ * n + c);
        std::swap(perm_[i], perm_[r % (i + 1)]);
      }
      ++epoch_;
      cursor_ = 0;
    }
    const size_t take = std::min(batch_size, n - cursor_);
    std::span<const size_t> out(perm_.data() + cursor_, take);
    cursor_ += take;
    return out;
  }

 private:
  std::vector<size_t> perm_;
  uint64_t seed_;
  uint64_t epoch_ = 0;
  size_t cursor_;
};

struct OnlineBatch {
  std::vector<SampledResponse> draws;
  std::vector<double> rewards;
};

OnlineBatch draw_batch(const Policy& pi, std::span<const Prompt> prompts,
                       const ExplicitRewardModel& rm, const TrainConfig& cfg, uint64_t step) {
  OnlineBatch b;
  b.draws.reserve(cfg.batch_size);
  b.rewards.reserve(cfg.batch_size);
  for (uint64_t i = 0; i < cfg.batch_size; ++i) {
    const uint64_t c = (step - 1) * cfg.batch_size + i;
    const double u = rng::uniform(cfg.seed, rng::kStreamPromptPick, c);
    const size_t idx = std::min(static_cast<size_t>(u * static_cast<double>(prompts.size())),
                                prompts.size() - 1);
    const Prompt& x = prompts[idx];
    Response y = pi.sample(x, rng::at(cfg.seed, kStreamResponseSeed, c));
    b.rewards.push_back(rm.reward(x, y));
    b.draws.push_back(SampledResponse{x, std::move(y)});
  }
  return b;
}

// Enumerated expectation of the online matching loss and (optionally) of the
// per-sample gradient the online estimator averages.
double online_exact(const Policy& pi, const Policy& ref, Beta beta, CompareAs cmp,
                    std::span<const Prompt> prompts, const ExplicitRewardModel& rm,
                    const ResponseSet& set, std::vector<double>* grad_out) {
  if (grad_out) grad_out->assign(pi.param_count(), 0.0);
  const double wx = 1.0 / static_cast<double>(prompts.size());
  double total = 0.0;
  for (const Prompt& x : prompts) {
    const std::vector<double> probs = response_probabilities(pi, x, set);
    for (size_t i = 0; i < set.size(); ++i) {
      const Response& y = set.at(i);
      const double r_theta = implicit_reward(pi, ref, beta, x, y);
      const double r_phi = rm.reward(x, y);
      double value, dr;
      if (cmp == CompareAs::RewardMse) {
        const double gap = r_theta - r_phi;
        value = gap * gap;
        dr = 2.0 * gap;
      } else {
        const double s = sigmoid(r_theta);
        const double gap = s - sigmoid(r_phi);
        value = gap * gap;
        dr = 2.0 * gap * s * (1.0 - s);
      }
      total += wx * probs[i] * value;
      if (grad_out) {
        pi.accumulate_log_prob_grad(x, y, wx * probs[i] * dr * beta.value, *grad_out);
      }
    }
  }
  return total;
}

// grad of mean_x KL(pi || ref), exact: sum_y pi (log pi - log ref) dlog pi.
std::vector<double> exact_kl_grad(const Policy& pi, const Policy& ref,
                                  std::span<const Prompt> prompts, const ResponseSet& set) {
  std::vector<double> g(pi.param_count(), 0.0);
  const double wx = 1.0 / static_cast<double>(prompts.size());
  for (const Prompt& x : prompts) {
    const std::vector<double> probs = response_probabilities(pi, x, set);
    for (size_t i = 0; i < set.size(); ++i) {
      const Response& y = set.at(i);
      const double diff = pi.log_prob(x, y) - ref.log_prob(x, y);
      pi.accumulate_log_prob_grad(x, y, wx * probs[i] * diff, g);
    }
  }
  return g;
}

// ascent gradient of the exact objective: mean_x E_pi[r] - beta * mean_x KL
std::vector<double> exact_objective_grad(const Policy& pi, const Policy& ref, Beta beta,
                                         std::span<const Prompt> prompts,
                                         const ExplicitRewardModel& rm, const ResponseSet& set) {
  std::vector<double> g(pi.param_count(), 0.0);
  const double wx = 1.0 / static_cast<double>(prompts.size());
  for (const Prompt& x : prompts) {
    const std::vector<double> probs = response_probabilities(pi, x, set);
    for (size_t i = 0; i < set.size(); ++i) {
      pi.accumulate_log_prob_grad(x, set.at(i), wx * probs[i] * rm.reward(x, set.at(i)), g);
    }
  }
  const std::vector<double> kg = exact_kl_grad(pi, ref, prompts, set);
  for (size_t i = 0; i < g.size(); ++i) g[i] -= beta.value * kg[i];
  return g;
}

EvalRecord online_eval(const Policy& pi, const Policy& ref, const TrainConfig& cfg,
                       std::span<const Prompt> prompts, const ExplicitRewardModel& rm,
                       const ResponseSet& set, bool pg_run, CompareAs cmp) {
  EvalRecord e;
  e.kl = mean_kl(pi, ref, prompts);
  const double wx = 1.0 / static_cast<double>(prompts.size());
  double mean_r = 0.0, mean_s = 0.0, mean_phi = 0.0;
  for (const Prompt& x : prompts) {
    const std::vector<double> probs = response_probabilities(pi, x, set);
    for (size_t i = 0; i < set.size(); ++i) {
      const Response& y = set.at(i);
      const double r_theta = implicit_reward(pi, ref, cfg.beta, x, y);
      mean_r += wx * probs[i] * r_theta;
      mean_s += wx * probs[i] * sigmoid(r_theta);
      mean_phi += wx * probs[i] * rm.reward(x, y);
    }
  }
  e.mean_r_theta_w = mean_r;
  e.mean_s_theta_w = mean_s;
  e.mean_r_theta_l = kNaN;
  e.mean_s_theta_l = kNaN;
  e.mean_explicit_reward = mean_phi;
  if (pg_run) {
    e.loss = -(mean_phi - cfg.beta.value * e.kl);  // negated exact objective
  } else {
    e.loss = online_exact(pi, ref, cfg.beta, cmp, prompts, rm, set, nullptr);
  }
  e.accuracy = kNaN;
  e.grad_est_sq_dev = kNaN;
  return e;
}

double sq_dev(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void check_online_prompts(const Policy& pi0, const Policy& ref, std::span<const Prompt> prompts) {
  if (prompts.empty()) throw EmptyBatch("online training needs at least one prompt");
  for (const Prompt& x : prompts) {
    if (!pi0.defined_on(x) || !ref.defined_on(x)) {
      throw UnknownPrompt("prompt id " + std::to_string(x.id) + " not covered by both policies");
    }
  }
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
  if (name == "una_pair_shaped") return LossKind::UnaPairShaped;
  if (name == "una_pair_unshaped") return LossKind::UnaPairUnshaped;
  if (name == "dpo") return LossKind::Dpo;
  if (name == "una_binary_mse") return LossKind::UnaBinaryMse;
  if (name == "una_binary_bce") return LossKind::UnaBinaryBce;
  if (name == "una_score") return LossKind::UnaScore;
  if (name == "una_online_reward") return LossKind::UnaOnlineReward;
  if (name == "una_online_score") return LossKind::UnaOnlineScore;
  if (name == "pg_baseline") return LossKind::PgBaseline;
  if (name == "rm_bt") return LossKind::RmBt;
  throw ValidationError("unknown loss_kind: " + name);
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::UnaPairShaped: return "una_pair_shaped";
    case LossKind::UnaPairUnshaped: return "una_pair_unshaped";
    case LossKind::Dpo: return "dpo";
    case LossKind::UnaBinaryMse: return "una_binary_mse";
    case LossKind::UnaBinaryBce: return "una_binary_bce";
    case LossKind::UnaScore: return "una_score";
    case LossKind::UnaOnlineReward: return "una_online_reward";
    case LossKind::UnaOnlineScore: return "una_online_score";
    case LossKind::PgBaseline: return "pg_baseline";
    case LossKind::RmBt: return "rm_bt";
  }
  throw ValidationError("unknown loss kind");
}

void TrainConfig::validate() const {
  beta.validate();
  if (!std::isfinite(step_size) || step_size < 0.0) throw ValidationError("step_size must be finite and non-negative");
  if (steps < 1) throw ValidationError("steps must be at least 1");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (eval_every < 1) throw ValidationError("eval_every must be at least 1");
  if (grad_norm_cap && (!std::isfinite(*grad_norm_cap) || *grad_norm_cap <= 0.0)) {
    throw ValidationError("grad_norm_cap must be a finite positive number when set");
  }
  score_bounds.validate();
}

TrainReport train_offline(const Policy& pi0, const Policy& ref, const TrainConfig& cfg,
                          std::span<const FeedbackRecord> data) {
  const auto t0 = Clock::now();
  cfg.validate();
  require_policy_pair(pi0, ref);
  if (data.empty()) throw EmptyBatch("training data is empty");

  FeedbackKind want;
  switch (cfg.loss_kind) {
    case LossKind::UnaPairShaped:
    case LossKind::UnaPairUnshaped:
    case LossKind::Dpo:
      want = FeedbackKind::Pairwise;
      break;
    case LossKind::UnaBinaryMse:
    case LossKind::UnaBinaryBce:
      want = FeedbackKind::Binary;
      break;
    case LossKind::UnaScore:
      want = FeedbackKind::Scalar;
      break;
    default:
      throw KindMismatch(loss_kind_name(cfg.loss_kind) + " is not an offline dataset loss");
  }
  for (const FeedbackRecord& rec : data) {
    if (rec.kind != want) throw KindMismatch("kind mismatch: dataset records do not fit " + loss_kind_name(cfg.loss_kind));
  }

  auto loss_on = [&](const Policy& pi, std::span<const FeedbackRecord> batch) {
    switch (cfg.loss_kind) {
      case LossKind::UnaPairShaped: return loss_una_pair(pi, ref, cfg.beta, batch, true);
      case LossKind::UnaPairUnshaped: return loss_una_pair(pi, ref, cfg.beta, batch, false);
      case LossKind::Dpo: return loss_dpo(pi, ref, cfg.beta, batch);
      case LossKind::UnaBinaryMse: return loss_una_binary(pi, ref, cfg.beta, batch, DifferenceLoss::Mse);
      case LossKind::UnaBinaryBce: return loss_una_binary(pi, ref, cfg.beta, batch, DifferenceLoss::Bce);
      default: return loss_una_score(pi, ref, cfg.beta, batch, cfg.score_bounds);
    }
  };

  std::set<uint32_t> ids;
  for (const FeedbackRecord& rec : data) ids.insert(rec.x.id);
  std::vector<Prompt> prompts;
  for (uint32_t id : ids) prompts.push_back(Prompt{id, {}});

  Policy pi = pi0;
  TrainReport report;
  auto record_eval = [&](uint64_t step) {
    EvalRecord e;
    e.step = step;
    e.loss = loss_on(pi, data).value;
    e.kl = mean_kl(pi, ref, prompts);
    double wr = 0, ws = 0, lr = 0, ls = 0;
    size_t nw = 0, nl = 0;
    for (const FeedbackRecord& rec : data) {
      if (rec.kind == FeedbackKind::Pairwise) {
        const double a = implicit_reward(pi, ref, cfg.beta, rec.x, rec.chosen);
        const double b = implicit_reward(pi, ref, cfg.beta, rec.x, rec.rejected);
        wr += a; ws += sigmoid(a); ++nw;
        lr += b; ls += sigmoid(b); ++nl;
      } else {
        const double r = implicit_reward(pi, ref, cfg.beta, rec.x, rec.response);
        const bool desired = rec.kind != FeedbackKind::Binary || rec.label == BinaryLabel::Desired;
        if (desired) { wr += r; ws += sigmoid(r); ++nw; }
        else { lr += r; ls += sigmoid(r); ++nl; }
      }
    }
    e.mean_r_theta_w = nw ? wr / static_cast<double>(nw) : kNaN;
    e.mean_s_theta_w = nw ? ws / static_cast<double>(nw) : kNaN;
    e.mean_r_theta_l = nl ? lr / static_cast<double>(nl) : kNaN;
    e.mean_s_theta_l = nl ? ls / static_cast<double>(nl) : kNaN;
    e.mean_explicit_reward = kNaN;
    e.accuracy = kNaN;
    e.grad_est_sq_dev = kNaN;
    report.evals.push_back(e);
  };

  record_eval(0);
  BatchCursor cursor(data.size(), cfg.seed);
  const bool full_batch = cfg.batch_size >= data.size();
  std::vector<FeedbackRecord> scratch;
  for (uint64_t step = 1; step <= cfg.steps; ++step) {
    LossResult res;
    if (full_batch) {
      res = loss_on(pi, data);
    } else {
      scratch.clear();
      for (size_t i : cursor.next(cfg.batch_size)) scratch.push_back(data[i]);
      res = loss_on(pi, scratch);
    }
    cap_gradient(res.grad, cfg.grad_norm_cap);
    pi = pi.apply_gradient(res.grad, cfg.step_size);
    if (step % cfg.eval_every == 0 || step == cfg.steps) record_eval(step);
  }
  report.final_policy = std::move(pi);
  report.total_ms = ms_since(t0);
  return report;
}

TrainReport train_online_una(const Policy& pi0, const Policy& ref, const TrainConfig& cfg,
                             std::span<const Prompt> prompts, const ExplicitRewardModel& rm) {
  const auto t0 = Clock::now();
  cfg.validate();
  require_policy_pair(pi0, ref);
  check_online_prompts(pi0, ref, prompts);
  CompareAs cmp;
  if (cfg.loss_kind == LossKind::UnaOnlineReward) cmp = CompareAs::RewardMse;
  else if (cfg.loss_kind == LossKind::UnaOnlineScore) cmp = CompareAs::ScoreMse;
  else throw KindMismatch(loss_kind_name(cfg.loss_kind) + " is not an online matching loss");

  const auto set = enumeration_for(pi0);
  Policy pi = pi0;
  TrainReport report;
  report.evals.push_back(online_eval(pi, ref, cfg, prompts, rm, *set, false, cmp));

  double dev_accum = 0.0;
  uint64_t dev_count = 0;
  std::vector<double> exact_grad;
  for (uint64_t step = 1; step <= cfg.steps; ++step) {
    const OnlineBatch batch = draw_batch(pi, prompts, rm, cfg, step);
    LossResult res = loss_una_online(pi, ref, cfg.beta, rm, batch.draws, cmp);
    if (cfg.track_grad_variance) {
      online_exact(pi, ref, cfg.beta, cmp, prompts, rm, *set, &exact_grad);
      dev_accum += sq_dev(res.grad, exact_grad);
      ++dev_count;
    }
    cap_gradient(res.grad, cfg.grad_norm_cap);
    pi = pi.apply_gradient(res.grad, cfg.step_size);
    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      EvalRecord e = online_eval(pi, ref, cfg, prompts, rm, *set, false, cmp);
      e.step = step;
      if (cfg.track_grad_variance && dev_count > 0) {
        e.grad_est_sq_dev = dev_accum / static_cast<double>(dev_count);
        dev_accum = 0.0;
        dev_count = 0;
      }
      report.evals.push_back(e);
    }
  }
  report.final_policy = std::move(pi);
  report.total_ms = ms_since(t0);
  return report;
}

TrainReport train_policy_gradient_baseline(const Policy& pi0, const Policy& ref,
                                           const TrainConfig& cfg,
                                           std::span<const Prompt> prompts,
                                           const ExplicitRewardModel& rm) {
  const auto t0 = Clock::now();
  cfg.validate();
  require_policy_pair(pi0, ref);
  check_online_prompts(pi0, ref, prompts);
  if (cfg.loss_kind != LossKind::PgBaseline) {
    throw KindMismatch(loss_kind_name(cfg.loss_kind) + " is not the policy-gradient baseline");
  }

  const auto set = enumeration_for(pi0);
  Policy pi = pi0;
  TrainReport report;
  report.evals.push_back(online_eval(pi, ref, cfg, prompts, rm, *set, true, cfg.compare_as));

  double dev_accum = 0.0;
  uint64_t dev_count = 0;
  for (uint64_t step = 1; step <= cfg.steps; ++step) {
    std::vector<double> ascent;
    if (cfg.pg_estimator == PgEstimator::Exact) {
      ascent = exact_objective_grad(pi, ref, cfg.beta, prompts, rm, *set);
    } else {
      const OnlineBatch batch = draw_batch(pi, prompts, rm, cfg, step);
      double baseline = 0.0;
      for (double r : batch.rewards) baseline += r;
      baseline /= static_cast<double>(batch.rewards.size());
      ascent.assign(pi.param_count(), 0.0);
      const double inv_b = 1.0 / static_cast<double>(batch.draws.size());
      for (size_t i = 0; i < batch.draws.size(); ++i) {
        pi.accumulate_log_prob_grad(batch.draws[i].x, batch.draws[i].y,
                                    (batch.rewards[i] - baseline) * inv_b, ascent);
      }
      const std::vector<double> kg = exact_kl_grad(pi, ref, prompts, *set);
      for (size_t i = 0; i < ascent.size(); ++i) ascent[i] -= cfg.beta.value * kg[i];
      if (cfg.track_grad_variance) {
        const std::vector<double> exact = exact_objective_grad(pi, ref, cfg.beta, prompts, rm, *set);
        dev_accum += sq_dev(ascent, exact);
        ++dev_count;
      }
    }
    std::vector<double> descent(ascent.size());
    for (size_t i = 0; i < ascent.size(); ++i) descent[i] = -ascent[i];
    cap_gradient(descent, cfg.grad_norm_cap);
    pi = pi.apply_gradient(descent, cfg.step_size);
    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      EvalRecord e = online_eval(pi, ref, cfg, prompts, rm, *set, true, cfg.compare_as);
      e.step = step;
      if (cfg.track_grad_variance && dev_count > 0) {
        e.grad_est_sq_dev = dev_accum / static_cast<double>(dev_count);
        dev_accum = 0.0;
        dev_count = 0;
      }
      report.evals.push_back(e);
    }
  }
  report.final_policy = std::move(pi);
  report.total_ms = ms_since(t0);
  return report;
}

std::pair<ExplicitRewardModel, TrainReport> train_reward_model(const ExplicitRewardModel& rm0,
                                                               const TrainConfig& cfg,
                                                               std::span<const FeedbackRecord> data) {
  const auto t0 = Clock::now();
  {
    // steps == 0 is allowed here as a null run that only evaluates
    TrainConfig check = cfg;
    if (check.steps == 0) check.steps = 1;
    check.validate();
  }
  if (cfg.loss_kind != LossKind::RmBt) {
    throw KindMismatch(loss_kind_name(cfg.loss_kind) + " does not train a reward model");
  }
  if (rm0.kind() != ExplicitRewardModel::Kind::TrainableBt) {
    throw NonTrainableModel("reward table cannot be trained");
  }
  if (data.empty()) throw EmptyBatch("training data is empty");
  for (const FeedbackRecord& rec : data) {
    if (rec.kind != FeedbackKind::Pairwise) throw KindMismatch("kind mismatch: reward model training needs pairwise records");
  }

  ExplicitRewardModel rm = rm0;
  TrainReport report;
  auto record_eval = [&](uint64_t step) {
    EvalRecord e;
    e.step = step;
    e.loss = rm_loss(rm, data).value;
    e.accuracy = rm_accuracy(rm, data);
    e.kl = kNaN;
    e.mean_r_theta_w = kNaN;
    e.mean_r_theta_l = kNaN;
    e.mean_s_theta_w = kNaN;
    e.mean_s_theta_l = kNaN;
    e.mean_explicit_reward = kNaN;
    e.grad_est_sq_dev = kNaN;
    report.evals.push_back(e);
  };

  record_eval(0);
  BatchCursor cursor(data.size(), cfg.seed);
  const bool full_batch = cfg.batch_size >= data.size();
  std::vector<FeedbackRecord> scratch;
  for (uint64_t step = 1; step <= cfg.steps; ++step) {
    LossResult res;
    if (full_batch) {
      res = rm_loss(rm, data);
    } else {
      scratch.clear();
      for (size_t i : cursor.next(cfg.batch_size)) scratch.push_back(data[i]);
      res = rm_loss(rm, scratch);
    }
    cap_gradient(res.grad, cfg.grad_norm_cap);
    rm = rm.apply_gradient(res.grad, cfg.step_size);
    if (step % cfg.eval_every == 0 || step == cfg.steps) record_eval(step);
  }
  report.total_ms = ms_since(t0);
  return {std::move(rm), std::move(report)};
}

void write_metrics_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw MissingArtifact("cannot open metrics file for writing: " + path);
  out << "step,loss,kl,mean_r_theta_w,mean_r_theta_l,mean_s_theta_w,mean_s_theta_l,mean_explicit_reward,ms\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << sep;
  };
  for (const EvalRecord& e : report.evals) {
    out << e.step << ',';
    put(e.loss, ',');
    put(e.kl, ',');
    put(e.mean_r_theta_w, ',');
    put(e.mean_r_theta_l, ',');
    put(e.mean_s_theta_w, ',');
    put(e.mean_s_theta_l, ',');
    put(e.mean_explicit_reward, ',');
    put(e.ms, '\n');
  }
  if (!out) throw MissingArtifact("failed while writing metrics file: " + path);
}

}  // namespace una
