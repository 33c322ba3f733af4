// Acceptance gate for the library: ten criteria, one PASS/FAIL line each.
// Exit code 0 only when every criterion holds. Tolerances are pinned next to
// the checks they guard.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "una/cli.hpp"
#include "una/dataset.hpp"
#include "una/losses.hpp"
#include "una/oracle.hpp"
#include "una/policy.hpp"
#include "una/reward.hpp"
#include "una/rng.hpp"
#include "una/trainer.hpp"
#include "una/verify.hpp"

using namespace una;
namespace fs = std::filesystem;

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double total_variation(const Policy& a, const Policy& b, const Prompt& x,
                       const ResponseSet& set) {
  const auto pa = response_probabilities(a, x, set);
  const auto pb = response_probabilities(b, x, set);
  double s = 0.0;
  for (size_t i = 0; i < pa.size(); ++i) s += std::fabs(pa[i] - pb[i]);
  return 0.5 * s;
}

// ---- shared fixture for the closed-form recovery criteria ------------------

struct RecoveryRun {
  oracle::TabularInstance inst;
  Policy opt;
  Policy trained;
};

struct RecoveryFixture {
  std::vector<RecoveryRun> runs;
  double train_seconds = 0.0;
};

const RecoveryFixture& recovery_fixture() {
  static const RecoveryFixture fixture = [] {
    RecoveryFixture f;
    const auto t0 = std::chrono::steady_clock::now();
    for (uint64_t i = 0; i < 10; ++i) {
      const bool hot = i % 2 == 1;  // alternate a strong and a weak tilt
      const double beta = hot ? 1.0 : 0.1;
      const double amp = hot ? 1.0 : 0.3;
      oracle::TabularInstance inst = verify::random_instance(i, 4, 16, beta, amp);
      Policy opt = oracle::optimal_policy_closed_form(inst);

      std::vector<uint32_t> ids;
      for (const Prompt& x : inst.prompts) ids.push_back(x.id);
      const Policy pi0 = Policy::uniform_tabular(ids, inst.responses);

      TrainConfig cfg;
      cfg.loss_kind = LossKind::PgBaseline;
      cfg.pg_estimator = PgEstimator::Exact;
      cfg.beta = inst.beta;
      cfg.steps = 5000;
      cfg.step_size = hot ? 1.8 : 12.0;
      cfg.eval_every = 5000;
      cfg.grad_norm_cap.reset();
      const TrainReport rep =
          train_policy_gradient_baseline(pi0, inst.ref, cfg, inst.prompts, inst.reward);
      f.runs.push_back(RecoveryRun{std::move(inst), std::move(opt), *rep.final_policy});
    }
    f.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return f;
  }();
  return fixture;
}

// ---- criterion bodies ------------------------------------------------------

void c1_closed_form_recovery() {
  const double kTvTol = 1e-3;       // per-prompt total variation at the trained policy
  const double kBudgetSec = 30.0;   // wall clock for all ten trainings
  const RecoveryFixture& f = recovery_fixture();
  for (size_t i = 0; i < f.runs.size(); ++i) {
    const RecoveryRun& r = f.runs[i];
    for (const Prompt& x : r.inst.prompts) {
      const double tv = total_variation(r.trained, r.opt, x, *r.inst.responses);
      require(tv <= kTvTol, "instance " + std::to_string(i) + " prompt " +
                                std::to_string(x.id) + ": total variation " + num(tv) +
                                " above " + num(kTvTol));
    }
  }
  require(f.train_seconds <= kBudgetSec,
          "training took " + num(f.train_seconds) + " s, budget " + num(kBudgetSec) + " s");
}

void c2_reward_recovery() {
  const double kOptTol = 1e-9;      // gap flatness at the closed-form optimum
  const double kTrainedTol = 1e-3;  // gap flatness at the trained policy
  const RecoveryFixture& f = recovery_fixture();
  for (size_t i = 0; i < f.runs.size(); ++i) {
    const RecoveryRun& r = f.runs[i];
    const auto at_opt = oracle::recovered_reward_gap(r.inst, r.opt);
    const auto at_trained = oracle::recovered_reward_gap(r.inst, r.trained);
    for (size_t p = 0; p < r.inst.prompts.size(); ++p) {
      require(at_opt.max_abs_deviation[p] <= kOptTol,
              "instance " + std::to_string(i) + ": deviation at the optimum " +
                  num(at_opt.max_abs_deviation[p]));
      require(at_trained.max_abs_deviation[p] <= kTrainedTol,
              "instance " + std::to_string(i) + ": deviation at the trained policy " +
                  num(at_trained.max_abs_deviation[p]));
    }
  }
}

void c3_dpo_equivalence() {
  const double kValueTol = 1e-12;
  const double kGradTol = 1e-10;
  const double betas[] = {0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0};
  for (uint64_t t = 0; t < 100; ++t) {
    const Beta beta(betas[t % 8]);
    Policy pi = Policy::uniform_tabular({0}, ResponseSet::enumerate_all(Vocab{2, 1}));
    Policy ref = pi.frozen_clone();
    std::shared_ptr<const ResponseSet> set;
    if (t % 2 == 0) {
      set = ResponseSet::enumerate_all(Vocab{6, 1});
      pi = Policy::random_tabular({0, 1}, set, t, 1.2);
      ref = Policy::random_tabular({0, 1}, set, t ^ 0x517cc1b7ull, 0.8).frozen_clone();
    } else {
      const Vocab v{4, 2};
      set = ResponseSet::enumerate_all(v);
      pi = Policy::random_parametric(v, 2, t, 0.9);
      ref = Policy::random_parametric(v, 2, t ^ 0x517cc1b7ull, 0.6).frozen_clone();
    }
    std::vector<FeedbackRecord> batch;
    for (size_t j = 0; j < 3; ++j) {
      const uint64_t c = 4 * j;
      const uint32_t prompt = static_cast<uint32_t>(rng::at(t, 30, c) % 2);
      const size_t a = rng::at(t, 30, c + 1) % set->size();
      const size_t b = (a + 1 + rng::at(t, 30, c + 2) % (set->size() - 1)) % set->size();
      batch.push_back(FeedbackRecord::pairwise(Prompt{prompt, {}}, set->at(a), set->at(b)));
    }
    const LossResult dpo = loss_dpo(pi, ref, beta, batch);
    const LossResult shaped = loss_una_pair(pi, ref, beta, batch, true);
    require(std::fabs(dpo.value - shaped.value) <= kValueTol,
            "triple " + std::to_string(t) + ": value gap " + num(dpo.value - shaped.value));
    for (size_t i = 0; i < dpo.grad.size(); ++i) {
      require(std::fabs(dpo.grad[i] - shaped.grad[i]) <= kGradTol,
              "triple " + std::to_string(t) + ": gradient gap " +
                  num(dpo.grad[i] - shaped.grad[i]));
    }
  }
}

void c4_proof_chain() {
  const double kSlackTol = -1e-12;   // inequalities may undershoot by round-off only
  const double kBoundTol = 1e-10;    // optimality and bound-value agreement
  const uint64_t seed = 17;

  for (uint64_t c = 0; c < 10000; ++c) {
    const size_t n = 2 + rng::at(seed, 40, 3 * c) % 7;
    std::vector<double> a(n), b(n);
    for (size_t i = 0; i < n; ++i) {
      a[i] = 10.0 * (1.0 - rng::uniform(seed, 41, c * 8 + i));
      b[i] = 10.0 * (1.0 - rng::uniform(seed, 42, c * 8 + i));
    }
    const bool proportional = c % 10 == 0;
    if (proportional) {
      const double scale = 0.1 + rng::uniform(seed, 43, c);
      for (size_t i = 0; i < n; ++i) b[i] = scale * a[i];
    }
    const auto res = oracle::check_log_sum_inequality(a, b);
    require(res.holds && res.slack >= kSlackTol,
            "log-sum case " + std::to_string(c) + ": slack " + num(res.slack));
    require(res.equality == proportional,
            "log-sum case " + std::to_string(c) + ": equality flag mismatch");
  }

  for (uint64_t c = 0; c < 10000; ++c) {
    const size_t n = 2 + rng::at(seed, 44, 3 * c) % 7;
    std::vector<double> w(n), pts(n);
    for (size_t i = 0; i < n; ++i) {
      w[i] = 10.0 * (1.0 - rng::uniform(seed, 45, c * 8 + i));
      pts[i] = 10.0 * (1.0 - rng::uniform(seed, 46, c * 8 + i));
    }
    const bool degenerate = c % 10 == 0;
    if (degenerate) {
      for (size_t i = 1; i < n; ++i) pts[i] = pts[0];
    }
    const auto res = oracle::check_jensen(w, pts);
    require(res.holds && res.slack >= kSlackTol,
            "jensen case " + std::to_string(c) + ": slack " + num(res.slack));
    require(res.equality == degenerate,
            "jensen case " + std::to_string(c) + ": equality flag mismatch");
  }

  const RecoveryFixture& f = recovery_fixture();
  for (size_t i = 0; i < f.runs.size(); ++i) {
    const RecoveryRun& r = f.runs[i];
    const double jstar = oracle::evaluate_objective(r.inst, r.opt);
    double bound = 0.0;
    for (size_t p = 0; p < r.inst.prompts.size(); ++p) {
      bound += oracle::log_partition(r.inst, p);
    }
    bound *= r.inst.beta.value / static_cast<double>(r.inst.prompts.size());
    require(std::fabs(jstar - bound) <= kBoundTol,
            "instance " + std::to_string(i) + ": optimum " + num(jstar) +
                " differs from the partition bound " + num(bound));
    std::vector<uint32_t> ids;
    for (const Prompt& x : r.inst.prompts) ids.push_back(x.id);
    for (uint64_t s = 0; s < 200; ++s) {
      const Policy cand =
          Policy::random_tabular(ids, r.inst.responses, i * 1000 + s, 2.0);
      const double j = oracle::evaluate_objective(r.inst, cand);
      require(j <= jstar + kBoundTol, "instance " + std::to_string(i) + " policy " +
                                          std::to_string(s) + ": objective " + num(j) +
                                          " beats the optimum " + num(jstar));
    }
  }
}

void c5_gradient_correctness() {
  const double kRelTol = 1e-4;
  const double kEps = 1e-5;
  const double betas[] = {0.03, 0.1, 0.3, 1.0, 3.0};

  enum class L { PairShaped, PairUnshaped, Dpo, BinaryMse, BinaryBce, Score };
  const L kinds[] = {L::PairShaped, L::PairUnshaped, L::Dpo, L::BinaryMse, L::BinaryBce, L::Score};
  const char* names[] = {"pair_shaped", "pair_unshaped", "dpo", "binary_mse", "binary_bce", "score"};

  for (uint64_t seed = 0; seed < 5; ++seed) {
    const Beta beta(betas[seed]);
    for (int param = 0; param < 2; ++param) {
      const bool tab = param == 0;
      std::shared_ptr<const ResponseSet> set;
      Policy pi = Policy::uniform_tabular({0}, ResponseSet::enumerate_all(Vocab{2, 1}));
      Policy ref = pi.frozen_clone();
      std::function<Policy(const std::vector<double>&)> rebuild;
      if (tab) {
        set = ResponseSet::enumerate_all(Vocab{4, 1});
        pi = Policy::random_tabular({0, 1}, set, seed, 1.0);
        ref = Policy::random_tabular({0, 1}, set, seed ^ 0x9E3779B9ull, 0.7).frozen_clone();
        rebuild = [set](const std::vector<double>& p) {
          return Policy::tabular({0, 1}, set, p);
        };
      } else {
        const Vocab v{4, 2};
        set = ResponseSet::enumerate_all(v);
        pi = Policy::random_parametric(v, 2, seed, 0.8);
        ref = Policy::random_parametric(v, 2, seed ^ 0x9E3779B9ull, 0.5).frozen_clone();
        rebuild = [v](const std::vector<double>& p) { return Policy::parametric(v, 2, p); };
      }

      auto pick = [&](uint64_t c) { return rng::at(seed, 47, c); };
      std::vector<FeedbackRecord> pairs, binaries, scalars;
      for (size_t j = 0; j < 3; ++j) {
        const uint32_t prompt = static_cast<uint32_t>(j % 2);
        const size_t a = pick(6 * j) % set->size();
        const size_t b = (a + 1 + pick(6 * j + 1) % (set->size() - 1)) % set->size();
        pairs.push_back(FeedbackRecord::pairwise(Prompt{prompt, {}}, set->at(a), set->at(b)));
        binaries.push_back(FeedbackRecord::binary(
            Prompt{prompt, {}}, set->at(a),
            j % 2 == 0 ? BinaryLabel::Desired : BinaryLabel::Undesired));
        scalars.push_back(FeedbackRecord::scalar(
            Prompt{prompt, {}}, set->at(b), 1.0 + 4.0 * rng::uniform(seed, 48, j)));
      }

      for (size_t k = 0; k < 6; ++k) {
        auto value_at = [&](const Policy& p) -> LossResult {
          switch (kinds[k]) {
            case L::PairShaped: return loss_una_pair(p, ref, beta, pairs, true);
            case L::PairUnshaped: return loss_una_pair(p, ref, beta, pairs, false);
            case L::Dpo: return loss_dpo(p, ref, beta, pairs);
            case L::BinaryMse: return loss_una_binary(p, ref, beta, binaries, DifferenceLoss::Mse);
            case L::BinaryBce: return loss_una_binary(p, ref, beta, binaries, DifferenceLoss::Bce);
            default: return loss_una_score(p, ref, beta, scalars, ScoreBounds{1.0, 5.0});
          }
        };
        const LossResult res = value_at(pi);
        const auto fd = oracle::finite_diff_grad(
            [&](const std::vector<double>& p) { return value_at(rebuild(p)).value; },
            pi.params(), kEps);
        const double rel = oracle::max_rel_error(res.grad, fd);
        require(rel < kRelTol, std::string(names[k]) + (tab ? " tabular" : " parametric") +
                                   " seed " + std::to_string(seed) + ": relative error " +
                                   num(rel));
      }
    }

    // explicit reward-model loss against the same yardstick
    const Vocab v{3, 1};
    std::vector<double> w(6);
    for (size_t i = 0; i < w.size(); ++i) w[i] = rng::normal(seed, 49, i);
    const auto rm = ExplicitRewardModel::trainable_bt_with_params(2, v, w);
    auto set = ResponseSet::enumerate_all(v);
    std::vector<FeedbackRecord> batch;
    for (size_t j = 0; j < 4; ++j) {
      const size_t a = rng::at(seed, 50, 2 * j) % set->size();
      const size_t b = (a + 1 + rng::at(seed, 50, 2 * j + 1) % (set->size() - 1)) % set->size();
      batch.push_back(FeedbackRecord::pairwise(Prompt{static_cast<uint32_t>(j % 2), {}},
                                               set->at(a), set->at(b)));
    }
    const LossResult res = rm_loss(rm, batch);
    const auto fd = oracle::finite_diff_grad(
        [&](const std::vector<double>& p) {
          return rm_loss(ExplicitRewardModel::trainable_bt_with_params(2, v, p), batch).value;
        },
        w, kEps);
    const double rel = oracle::max_rel_error(res.grad, fd);
    require(rel < kRelTol, "rm_loss seed " + std::to_string(seed) + ": relative error " + num(rel));
  }
}

void c6_binary_feedback() {
  const double kDesiredFloor = 0.9;
  const double kUndesiredCeil = 0.1;
  // At these temperatures a score of 0.9 needs an implicit reward of 2.2,
  // which in turn needs log pi - log ref around 220. The instance therefore
  // starts the desired response 300 logits below the rest in both the
  // reference and the initial policy, and leaves three responses unlabeled so
  // probability mass has somewhere to sit while the labeled pair separates.
  auto set = ResponseSet::enumerate_all(Vocab{5, 1});
  std::vector<double> logits(2 * set->size(), 0.0);
  for (size_t p = 0; p < 2; ++p) logits[p * set->size() + 1] = -300.0;
  const Policy ref = Policy::tabular({0, 1}, set, logits, true);
  const Policy pi0 = Policy::tabular({0, 1}, set, logits);
  std::vector<FeedbackRecord> data;
  for (uint32_t p : {0u, 1u}) {
    data.push_back(FeedbackRecord::binary(Prompt{p, {}}, set->at(1), BinaryLabel::Desired));
    data.push_back(FeedbackRecord::binary(Prompt{p, {}}, set->at(2), BinaryLabel::Undesired));
  }

  struct Setting {
    LossKind kind;
    double beta;
    double step;
    const char* name;
  };
  const Setting settings[] = {
      {LossKind::UnaBinaryMse, 0.01, 2000.0, "squared error"},
      {LossKind::UnaBinaryBce, 0.03, 150.0, "cross entropy"},
  };
  for (const Setting& s : settings) {
    TrainConfig cfg;
    cfg.loss_kind = s.kind;
    cfg.beta = Beta(s.beta);
    cfg.steps = 2000;
    cfg.step_size = s.step;
    cfg.eval_every = 2000;
    const TrainReport rep = train_offline(pi0, ref, cfg, data);
    const EvalRecord& last = rep.last();
    require(last.mean_s_theta_w > kDesiredFloor,
            std::string(s.name) + ": desired mean score " + num(last.mean_s_theta_w));
    require(last.mean_s_theta_l < kUndesiredCeil,
            std::string(s.name) + ": undesired mean score " + num(last.mean_s_theta_l));
  }
}

void c7_online_vs_baseline() {
  const double kTvTol = 0.05;
  auto set = ResponseSet::enumerate_all(Vocab{5, 2});
  const std::vector<Prompt> prompts{Prompt{0, {}}, Prompt{1, {}}};
  const Policy ref = Policy::uniform_tabular({0, 1}, set).frozen_clone();
  const Policy pi0 = Policy::uniform_tabular({0, 1}, set);

  std::vector<ExplicitRewardModel::TableEntry> entries;
  for (uint32_t p : {0u, 1u}) {
    for (size_t i = 0; i < set->size(); ++i) {
      bool has3 = false;
      for (uint32_t t : set->at(i).tokens) has3 = has3 || t == 3;
      entries.push_back({p, set->at(i), has3 ? 1.0 : 0.0});
    }
  }
  const auto rm = ExplicitRewardModel::table(std::move(entries));

  oracle::TabularInstance inst{prompts, set, ref, rm, Beta(0.3)};
  const Policy tilt = oracle::optimal_policy_closed_form(inst);

  // (i) the online matcher lands on the exponential tilt
  TrainConfig cfg;
  cfg.loss_kind = LossKind::UnaOnlineReward;
  cfg.beta = Beta(0.3);
  cfg.steps = 16000;
  cfg.step_size = 0.08;
  cfg.batch_size = 32;
  cfg.eval_every = 16000;
  cfg.seed = 42;
  const TrainReport matched = train_online_una(pi0, ref, cfg, prompts, rm);
  for (const Prompt& x : prompts) {
    const double tv = total_variation(*matched.final_policy, tilt, x, *set);
    require(tv <= kTvTol,
            "prompt " + std::to_string(x.id) + ": total variation " + num(tv) + " from the tilt");
  }

  // (ii) its gradient estimator deviates less than the score-function baseline
  double dev_una = 0.0, dev_pg = 0.0;
  size_t count_una = 0, count_pg = 0;
  TrainReport sample_una, sample_pg;
  for (uint64_t seed = 0; seed < 32; ++seed) {
    TrainConfig c;
    c.beta = Beta(0.3);
    c.steps = 400;
    c.step_size = 0.15;
    c.batch_size = 16;
    c.eval_every = 50;
    c.track_grad_variance = true;
    c.seed = seed;

    c.loss_kind = LossKind::UnaOnlineReward;
    const TrainReport ru = train_online_una(pi0, ref, c, prompts, rm);
    c.loss_kind = LossKind::PgBaseline;
    c.pg_estimator = PgEstimator::Sampled;
    const TrainReport rp = train_policy_gradient_baseline(pi0, ref, c, prompts, rm);
    for (const EvalRecord& e : ru.evals) {
      if (!std::isnan(e.grad_est_sq_dev)) {
        dev_una += e.grad_est_sq_dev;
        ++count_una;
      }
    }
    for (const EvalRecord& e : rp.evals) {
      if (!std::isnan(e.grad_est_sq_dev)) {
        dev_pg += e.grad_est_sq_dev;
        ++count_pg;
      }
    }
    if (seed == 0) {
      sample_una = ru;
      sample_pg = rp;
    }
  }
  require(count_una > 0 && count_pg > 0, "no deviation windows recorded");
  dev_una /= static_cast<double>(count_una);
  dev_pg /= static_cast<double>(count_pg);
  require(dev_una < dev_pg, "estimator deviation " + num(dev_una) +
                                " not below the baseline's " + num(dev_pg));

  // (iii) the two reports speak the same schema
  require(sample_una.evals.size() == sample_pg.evals.size(), "eval grids differ in length");
  for (size_t i = 0; i < sample_una.evals.size(); ++i) {
    require(sample_una.evals[i].step == sample_pg.evals[i].step, "eval grids differ");
  }
  const auto dir = fs::temp_directory_path();
  const std::string pa = (dir / "una_acc_schema_a.csv").string();
  const std::string pb = (dir / "una_acc_schema_b.csv").string();
  write_metrics_csv(sample_una, pa);
  write_metrics_csv(sample_pg, pb);
  std::ifstream fa(pa), fb(pb);
  std::string ha, hb;
  std::getline(fa, ha);
  std::getline(fb, hb);
  require(ha == hb && !ha.empty(), "metric headers differ");
  fs::remove(pa);
  fs::remove(pb);
}

void c8_reward_model_training() {
  const double kAccuracyFloor = 0.95;
  const double kNegationTol = 1e-6;
  const uint64_t seed = 7;
  const uint32_t num_prompts = 4;
  const Vocab v{5, 2};
  auto set = ResponseSet::enumerate_all(v);

  std::vector<double> truth(ExplicitRewardModel::trainable_bt(num_prompts, v).param_count());
  for (size_t i = 0; i < truth.size(); ++i) truth[i] = rng::normal(seed, 70, i);
  const auto oracle_rm = ExplicitRewardModel::trainable_bt_with_params(num_prompts, v, truth);

  std::vector<FeedbackRecord> data;
  uint64_t c = 0;
  while (data.size() < 512) {
    const uint32_t prompt = static_cast<uint32_t>(rng::at(seed, 71, c) % num_prompts);
    const size_t a = rng::at(seed, 72, c) % set->size();
    const size_t b_shift = 1 + rng::at(seed, 73, c) % (set->size() - 1);
    const size_t b = (a + b_shift) % set->size();
    ++c;
    const Prompt x{prompt, {}};
    const double margin = oracle_rm.reward(x, set->at(a)) - oracle_rm.reward(x, set->at(b));
    if (std::fabs(margin) < 0.05) continue;  // keep the set cleanly separable
    if (margin > 0.0) {
      data.push_back(FeedbackRecord::pairwise(x, set->at(a), set->at(b)));
    } else {
      data.push_back(FeedbackRecord::pairwise(x, set->at(b), set->at(a)));
    }
  }

  TrainConfig cfg;
  cfg.loss_kind = LossKind::RmBt;
  cfg.steps = 3000;
  cfg.step_size = 0.5;
  cfg.batch_size = 512;
  cfg.eval_every = 3000;
  const auto rm0 = ExplicitRewardModel::trainable_bt(num_prompts, v);
  const auto [rm, rep] = train_reward_model(rm0, cfg, data);
  require(rep.last().accuracy >= kAccuracyFloor,
          "accuracy " + num(rep.last().accuracy) + " below " + num(kAccuracyFloor));

  std::vector<FeedbackRecord> swapped;
  for (const FeedbackRecord& r : data) {
    swapped.push_back(FeedbackRecord::pairwise(r.x, r.rejected, r.chosen));
  }
  const auto [rm_swapped, rep_swapped] = train_reward_model(rm0, cfg, swapped);
  for (const FeedbackRecord& r : data) {
    const double m = rm.reward(r.x, r.chosen) - rm.reward(r.x, r.rejected);
    const double ms = rm_swapped.reward(r.x, r.chosen) - rm_swapped.reward(r.x, r.rejected);
    require(std::fabs(m + ms) <= kNegationTol,
            "label swap did not negate the margin: " + num(m) + " vs " + num(ms));
  }
}

void c9_score_distillation() {
  const double kLossCeil = 1e-6;
  require(normalize_score(1.0, ScoreBounds{1.0, 5.0}) == 0.0, "normalize(1) != 0");
  require(normalize_score(3.0, ScoreBounds{1.0, 5.0}) == 0.5, "normalize(3) != 0.5");
  require(normalize_score(5.0, ScoreBounds{1.0, 5.0}) == 1.0, "normalize(5) != 1");

  auto set = ResponseSet::enumerate_all(Vocab{5, 1});
  const Policy ref = Policy::uniform_tabular({0, 1}, set).frozen_clone();
  const Policy target = Policy::random_tabular({0, 1}, set, 31, 1.0);
  const Beta beta(1.0);

  // annotations generated by a reachable policy, so the loss can hit zero
  std::vector<FeedbackRecord> data;
  for (uint32_t p : {0u, 1u}) {
    for (size_t i = 0; i < set->size(); ++i) {
      const double raw = 1.0 + 4.0 * implicit_score(target, ref, beta, Prompt{p, {}}, set->at(i));
      data.push_back(FeedbackRecord::scalar(Prompt{p, {}}, set->at(i), raw));
    }
  }

  TrainConfig cfg;
  cfg.loss_kind = LossKind::UnaScore;
  cfg.beta = beta;
  cfg.steps = 2000;
  cfg.step_size = 20.0;
  cfg.eval_every = 2000;
  const TrainReport rep = train_offline(Policy::uniform_tabular({0, 1}, set), ref, cfg, data);
  require(rep.last().loss < kLossCeil, "final loss " + num(rep.last().loss));
}

void c10_determinism_and_cli() {
  const double kVerifyBudgetSec = 120.0;
  const auto dir = fs::temp_directory_path() / "una_acc_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string config = (dir / "config.txt").string();
  const std::string dataset = (dir / "data.jsonl").string();
  {
    std::ofstream cf(config);
    cf << "loss_kind = dpo\nbeta = 0.1\nstep_size = 0.2\nsteps = 40\neval_every = 10\n";
    std::ofstream df(dataset);
    df << R"({"kind":"pairwise","prompt":0,"chosen":[1,0],"rejected":[2,0]})" << "\n"
       << R"({"kind":"pairwise","prompt":1,"chosen":[3,0],"rejected":[4,0]})" << "\n";
  }
  std::ostringstream sink, errs;
  require(cli::cmd_train(config, dataset, (dir / "a").string(), {}, sink, errs) == 0,
          "first training run failed: " + errs.str());
  require(cli::cmd_train(config, dataset, (dir / "b").string(), {}, sink, errs) == 0,
          "second training run failed: " + errs.str());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
  };
  const std::string ma = slurp(dir / "a" / "metrics.csv");
  require(!ma.empty() && ma == slurp(dir / "b" / "metrics.csv"),
          "metrics files differ between identical runs");
  require(slurp(dir / "a" / "policy.ckpt") == slurp(dir / "b" / "policy.ckpt"),
          "checkpoints differ between identical runs");
  fs::remove_all(dir);

  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream out, err;
  const int code = cli::cmd_verify("all", 17, out, err);
  const double sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  require(code == 0, "verification exited with code " + std::to_string(code));
  require(sec <= kVerifyBudgetSec, "verification took " + num(sec) + " s");
}

struct Criterion {
  const char* label;
  void (*body)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"A1 exact ascent recovers the closed-form tilt", c1_closed_form_recovery},
      {"A2 implicit reward gaps are flat where they should be", c2_reward_recovery},
      {"A3 direct preference loss equals the shaped pair loss", c3_dpo_equivalence},
      {"A4 inequality chain and objective bound hold", c4_proof_chain},
      {"A5 analytic gradients match finite differences", c5_gradient_correctness},
      {"A6 binary feedback separates desired from undesired", c6_binary_feedback},
      {"A7 online matching beats the baseline estimator", c7_online_vs_baseline},
      {"A8 preference-model fit and label-swap symmetry", c8_reward_model_training},
      {"A9 score normalization and realizable distillation", c9_score_distillation},
      {"A10 byte-stable runs and full verification", c10_determinism_and_cli},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    try {
      c.body();
      std::cout << "PASS " << c.label << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "FAIL " << c.label << " (" << e.what() << ")\n";
    }
    std::cout.flush();
  }
  if (failures == 0) {
    std::cout << "all 10 criteria passed\n";
    return 0;
  }
  std::cout << failures << " of 10 criteria failed\n";
  return 1;
}
