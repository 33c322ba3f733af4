#include "una/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <ostream>
#include <thread>

#include "una/losses.hpp"
#include "una/rng.hpp"

namespace una::verify {

namespace {

// local rng streams for case generation
constexpr uint64_t kStreamRefInit = 8;
constexpr uint64_t kStreamReward = 9;
constexpr uint64_t kStreamSweepA = 10;
constexpr uint64_t kStreamSweepB = 11;
constexpr uint64_t kStreamRecords = 12;
constexpr uint64_t kStreamPolicies = 13;
constexpr uint64_t kStreamDraws = 14;

constexpr double kBetaGrid[8] = {0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0};

// Evaluates fn(0..n-1) across threads; the output vector is ordered by index,
// so the merged result never depends on the thread count.
template <class T, class Fn>
std::vector<T> sweep(size_t n, unsigned threads, Fn&& fn) {
  std::vector<T> out(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < n; i += workers) out[i] = fn(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

void add(SuiteReport& rep, std::string name, bool pass, double observed, double bound,
         std::string detail = {}) {
  rep.checks.push_back(CheckResult{std::move(name), pass, observed, bound, std::move(detail)});
}

Policy random_policy_for(const oracle::TabularInstance& inst, uint64_t seed, double scale) {
  std::vector<uint32_t> ids;
  for (const Prompt& x : inst.prompts) ids.push_back(x.id);
  return Policy::random_tabular(std::move(ids), inst.responses, seed, scale);
}

std::vector<FeedbackRecord> random_records(FeedbackKind kind, const ResponseSet& set,
                                           uint32_t num_prompts, size_t n, uint64_t seed) {
  std::vector<FeedbackRecord> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const Prompt x{static_cast<uint32_t>(rng::at(seed, kStreamRecords, 4 * i) % num_prompts), {}};
    const size_t a = rng::at(seed, kStreamRecords, 4 * i + 1) % set.size();
    switch (kind) {
      case FeedbackKind::Pairwise: {
        size_t b = rng::at(seed, kStreamRecords, 4 * i + 2) % (set.size() - 1);
        if (b >= a) ++b;
        out.push_back(FeedbackRecord::pairwise(x, set.at(a), set.at(b)));
        break;
      }
      case FeedbackKind::Binary: {
        const bool desired = rng::at(seed, kStreamRecords, 4 * i + 2) & 1;
        out.push_back(FeedbackRecord::binary(
            x, set.at(a), desired ? BinaryLabel::Desired : BinaryLabel::Undesired));
        break;
      }
      case FeedbackKind::Scalar: {
        const double raw = 1.0 + 4.0 * rng::uniform(seed, kStreamRecords, 4 * i + 2);
        out.push_back(FeedbackRecord::scalar(x, set.at(a), raw));
        break;
      }
    }
  }
  return out;
}

Policy rebuild_like(const Policy& like, const std::vector<double>& params) {
  if (like.kind() == Policy::Kind::Tabular) {
    return Policy::tabular(like.prompt_ids(), like.response_set(), params);
  }
  return Policy::parametric(like.vocab(), like.num_prompts(), params);
}

std::string save_replay(const oracle::TabularInstance& inst, const std::string& replay_dir,
                        const std::string& name) {
  std::filesystem::create_directories(replay_dir);
  const std::string path = replay_dir + "/replay_" + name + ".json";
  inst.save(path);
  return path;
}

// --- proofs ------------------------------------------------------------------

void proofs_checks(SuiteReport& rep, uint64_t seed, unsigned threads,
                   const std::string& replay_dir) {
  {
    std::vector<double> a(6), b(6);
    for (size_t i = 0; i < b.size(); ++i) {
      b[i] = 0.1 + 9.9 * rng::uniform(seed, kStreamSweepA, i);
      a[i] = 2.0 * b[i];
    }
    const auto c = oracle::check_log_sum_inequality(a, b);
    add(rep, "log_sum_proportional_equality",
        c.holds && c.equality && std::abs(c.slack) <= 1e-12, c.slack, 1e-12);
  }
  {
    const std::vector<double> a{1.0, 3.0};
    const std::vector<double> b{2.0, 2.0};
    const auto c = oracle::check_log_sum_inequality(a, b);
    const double expected = std::log(0.5) + 3.0 * std::log(1.5);
    add(rep, "log_sum_two_term_value", c.holds && std::abs(c.slack - expected) <= 1e-12,
        c.slack, 1e-12, "expected slack " + std::to_string(expected));
  }
  {
    const size_t cases = 10000;
    const auto slacks = sweep<double>(cases, threads, [&](size_t i) {
      const size_t len = 2 + rng::at(seed, kStreamSweepA, 16 * i) % 7;
      std::vector<double> a(len), b(len);
      for (size_t k = 0; k < len; ++k) {
        a[k] = 10.0 * (1.0 - rng::uniform(seed, kStreamSweepA, 16 * i + 2 * k + 1));
        b[k] = 10.0 * (1.0 - rng::uniform(seed, kStreamSweepB, 16 * i + 2 * k + 2));
      }
      return oracle::check_log_sum_inequality(a, b).slack;
    });
    const double worst = *std::min_element(slacks.begin(), slacks.end());
    add(rep, "log_sum_random_sweep", worst >= -1e-12, worst, -1e-12,
        std::to_string(cases) + " random pairs");
  }
  {
    const std::vector<double> w{0.4, 1.7, 2.2};
    const std::vector<double> p{1.25, 1.25, 1.25};
    const auto c = oracle::check_jensen(w, p);
    add(rep, "jensen_equal_points", c.holds && std::abs(c.slack) <= 1e-12, c.slack, 1e-12);
  }
  {
    const double e = std::exp(1.0);
    const std::vector<double> w{1.0, 1.0};
    const std::vector<double> p{1.0, e};
    const auto c = oracle::check_jensen(w, p);
    const double mean = (1.0 + e) / 2.0;
    const double expected = e / 2.0 - mean * std::log(mean);
    add(rep, "jensen_two_point_value", c.holds && std::abs(c.slack - expected) <= 1e-12,
        c.slack, 1e-12, "expected slack " + std::to_string(expected));
  }
  {
    const size_t cases = 10000;
    const uint64_t jseed = seed + 2;
    const auto slacks = sweep<double>(cases, threads, [&](size_t i) {
      const size_t len = 2 + rng::at(jseed, kStreamSweepA, 16 * i) % 7;
      std::vector<double> w(len), p(len);
      for (size_t k = 0; k < len; ++k) {
        w[k] = 10.0 * (1.0 - rng::uniform(jseed, kStreamSweepA, 16 * i + 2 * k + 1));
        p[k] = 10.0 * (1.0 - rng::uniform(jseed, kStreamSweepB, 16 * i + 2 * k + 2));
      }
      return oracle::check_jensen(w, p).slack;
    });
    const double worst = *std::min_element(slacks.begin(), slacks.end());
    add(rep, "jensen_random_sweep", worst >= -1e-12, worst, -1e-12,
        std::to_string(cases) + " random cases");
  }

  // tilt optimality, upper-bound identity, and gap constancy share the same
  // 50 seeded instances
  struct TiltStats {
    double min_margin = 0.0;
    double bound_diff = 0.0;
    double gap_dev = 0.0;
  };
  const auto stats = sweep<TiltStats>(50, threads, [&](size_t s) {
    const double beta = kBetaGrid[3 + s % 4];  // 0.03 .. 1.0
    const auto inst = random_instance(s, 3, 5, beta, 1.0);
    const Policy star = oracle::optimal_policy_closed_form(inst);
    const double j_star = oracle::evaluate_objective(inst, star);
    TiltStats t;
    t.min_margin = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < 200; ++j) {
      const Policy pi = random_policy_for(inst, rng::at(s, kStreamPolicies, j), 2.0);
      t.min_margin = std::min(t.min_margin, j_star - oracle::evaluate_objective(inst, pi));
    }
    double mean_log_z = 0.0;
    for (size_t p = 0; p < inst.prompts.size(); ++p) mean_log_z += oracle::log_partition(inst, p);
    mean_log_z /= static_cast<double>(inst.prompts.size());
    t.bound_diff = std::abs(j_star - beta * mean_log_z);
    const auto gap = oracle::recovered_reward_gap(inst, star);
    t.gap_dev = *std::max_element(gap.max_abs_deviation.begin(), gap.max_abs_deviation.end());
    return t;
  });
  {
    double worst = std::numeric_limits<double>::infinity();
    size_t worst_seed = 0;
    for (size_t s = 0; s < stats.size(); ++s) {
      if (stats[s].min_margin < worst) {
        worst = stats[s].min_margin;
        worst_seed = s;
      }
    }
    const bool pass = worst >= -1e-10;
    std::string detail = "50 instances x 200 policies";
    if (!pass) {
      detail = "replay: " + save_replay(random_instance(worst_seed, 3, 5, kBetaGrid[3 + worst_seed % 4], 1.0),
                                        replay_dir, "tilt_optimality");
    }
    add(rep, "tilt_optimality", pass, worst, -1e-10, detail);
  }
  {
    double worst = 0.0;
    size_t worst_seed = 0;
    for (size_t s = 0; s < stats.size(); ++s) {
      if (stats[s].bound_diff > worst) {
        worst = stats[s].bound_diff;
        worst_seed = s;
      }
    }
    const bool pass = worst <= 1e-10;
    std::string detail = "J(optimum) vs beta * mean log Z";
    if (!pass) {
      detail = "replay: " + save_replay(random_instance(worst_seed, 3, 5, kBetaGrid[3 + worst_seed % 4], 1.0),
                                        replay_dir, "upper_bound_identity");
    }
    add(rep, "upper_bound_identity", pass, worst, 1e-10, detail);
  }
  {
    double worst = 0.0;
    for (const TiltStats& t : stats) worst = std::max(worst, t.gap_dev);
    add(rep, "gap_constancy_at_optimum", worst <= 1e-9, worst, 1e-9, "50 instances");
  }

  // adding a per-prompt offset to the reward must not move the optimum
  {
    const auto diffs = sweep<double>(10, threads, [&](size_t s) {
      const auto inst = random_instance(1000 + s, 3, 5, kBetaGrid[4 + s % 3], 1.0);
      std::vector<ExplicitRewardModel::TableEntry> shifted;
      for (const auto& [key, r] : inst.reward.entries()) {
        const double h = 4.0 * rng::uniform(1000 + s, kStreamSweepB, key.first) - 2.0;
        shifted.push_back({key.first, Response{key.second}, r + h});
      }
      oracle::TabularInstance inst2{inst.prompts, inst.responses, inst.ref,
                                    ExplicitRewardModel::table(std::move(shifted)), inst.beta};
      const Policy a = oracle::optimal_policy_closed_form(inst);
      const Policy b = oracle::optimal_policy_closed_form(inst2);
      double worst = 0.0;
      for (const Prompt& x : inst.prompts) {
        for (size_t i = 0; i < inst.responses->size(); ++i) {
          const double pa = std::exp(a.log_prob(x, inst.responses->at(i)));
          const double pb = std::exp(b.log_prob(x, inst.responses->at(i)));
          worst = std::max(worst, std::abs(pa - pb));
        }
      }
      return worst;
    });
    const double worst = *std::max_element(diffs.begin(), diffs.end());
    add(rep, "reward_shift_invariance", worst <= 1e-12, worst, 1e-12, "10 instances");
  }

  // brute-force simplex grid search agrees with the closed form
  {
    const auto diffs = sweep<double>(10, threads, [&](size_t s) {
      const uint64_t iseed = 2000 + s;
      const double beta = s % 2 ? 1.0 : 0.3;
      const double r0 = rng::uniform(iseed, kStreamReward, 0);
      const double r1 = rng::uniform(iseed, kStreamReward, 1);
      const auto inst = two_response_instance(r0, r1, beta);
      const Prompt& x = inst.prompts[0];
      const double q0 = std::exp(inst.ref.log_prob(x, inst.responses->at(0)));
      const double q1 = 1.0 - q0;
      double best_p = 0.0, best_j = -std::numeric_limits<double>::infinity();
      for (int k = 0; k <= 1000; ++k) {
        const double p = k / 1000.0;
        auto term = [](double prob, double q) { return prob > 0.0 ? prob * std::log(prob / q) : 0.0; };
        const double j = p * r0 + (1.0 - p) * r1 - beta * (term(p, q0) + term(1.0 - p, q1));
        if (j > best_j) {
          best_j = j;
          best_p = p;
        }
      }
      const Policy star = oracle::optimal_policy_closed_form(inst);
      const double p_star = std::exp(star.log_prob(x, inst.responses->at(0)));
      return std::abs(best_p - p_star);
    });
    const double worst = *std::max_element(diffs.begin(), diffs.end());
    add(rep, "grid_search_matches_tilt", worst <= 1e-3, worst, 1e-3, "grid step 1e-3");
  }
}

// --- gradients ---------------------------------------------------------------

struct GradFixture {
  Policy pi;
  Policy ref;
  std::shared_ptr<const ResponseSet> set;  // null for parametric
  uint32_t num_prompts;
};

GradFixture tabular_fixture(uint64_t seed) {
  const Vocab v{6, 1};
  auto set = ResponseSet::enumerate_all(v);
  std::vector<uint32_t> ids{0, 1};
  Policy pi = Policy::random_tabular(ids, set, seed, 1.0);
  Policy ref = Policy::random_tabular(ids, set, seed ^ 0x9E3779B9ull, 1.0).frozen_clone();
  return GradFixture{std::move(pi), std::move(ref), std::move(set), 2};
}

GradFixture parametric_fixture(uint64_t seed) {
  const Vocab v{4, 2};
  Policy pi = Policy::random_parametric(v, 2, seed, 1.0);
  Policy ref = Policy::random_parametric(v, 2, seed ^ 0x9E3779B9ull, 1.0).frozen_clone();
  return GradFixture{std::move(pi), std::move(ref), ResponseSet::enumerate_all(v), 2};
}

void grad_check(SuiteReport& rep, const std::string& name, const Policy& pi,
                const std::function<LossResult(const Policy&)>& eval) {
  const LossResult res = eval(pi);
  const std::vector<double> fd = oracle::finite_diff_grad(
      [&](const std::vector<double>& p) { return eval(rebuild_like(pi, p)).value; }, pi.params());
  const double err = oracle::max_rel_error(res.grad, fd);
  add(rep, name, err < 1e-4, err, 1e-4);
}

void gradients_checks(SuiteReport& rep, uint64_t seed, unsigned threads,
                      const std::string& replay_dir) {
  (void)threads;
  (void)replay_dir;
  size_t case_index = 0;
  for (const bool parametric : {false, true}) {
    const std::string suffix = parametric ? "_parametric" : "_tabular";
    // the dpo tabular check is pinned to seed 11; everything else follows the
    // suite seed
    const auto fixture_for = [&](uint64_t s) {
      return parametric ? parametric_fixture(s) : tabular_fixture(s);
    };

    struct OfflineCase {
      const char* name;
      FeedbackKind kind;
      std::function<LossResult(const Policy&, const Policy&, Beta, std::span<const FeedbackRecord>)> fn;
    };
    const OfflineCase cases[] = {
        {"grad_pair_shaped", FeedbackKind::Pairwise,
         [](const Policy& pi, const Policy& ref, Beta b, std::span<const FeedbackRecord> d) {
           return loss_una_pair(pi, ref, b, d, true);
         }},
        {"grad_pair_unshaped", FeedbackKind::Pairwise,
         [](const Policy& pi, const Policy& ref, Beta b, std::span<const FeedbackRecord> d) {
           return loss_una_pair(pi, ref, b, d, false);
         }},
        {"grad_dpo", FeedbackKind::Pairwise,
         [](const Policy& pi, const Policy& ref, Beta b, std::span<const FeedbackRecord> d) {
           return loss_dpo(pi, ref, b, d);
         }},
        {"grad_binary_mse", FeedbackKind::Binary,
         [](const Policy& pi, const Policy& ref, Beta b, std::span<const FeedbackRecord> d) {
           return loss_una_binary(pi, ref, b, d, DifferenceLoss::Mse);
         }},
        {"grad_binary_bce", FeedbackKind::Binary,
         [](const Policy& pi, const Policy& ref, Beta b, std::span<const FeedbackRecord> d) {
           return loss_una_binary(pi, ref, b, d, DifferenceLoss::Bce);
         }},
        {"grad_score", FeedbackKind::Scalar,
         [](const Policy& pi, const Policy& ref, Beta b, std::span<const FeedbackRecord> d) {
           return loss_una_score(pi, ref, b, d, ScoreBounds{1.0, 5.0});
         }},
    };
    for (const OfflineCase& c : cases) {
      const bool pinned = !parametric && std::string(c.name) == "grad_dpo";
      const uint64_t s = pinned ? 11 : seed + 31 * case_index;
      ++case_index;
      GradFixture fx = fixture_for(s);
      const Beta beta{kBetaGrid[case_index % 8]};
      const auto records = random_records(c.kind, *fx.set, fx.num_prompts, 6, s + 1);
      const Policy ref = fx.ref;
      auto fn = c.fn;
      grad_check(rep, c.name + suffix, fx.pi,
                 [fn, ref, beta, records](const Policy& pi) { return fn(pi, ref, beta, records); });
    }

    for (const CompareAs cmp : {CompareAs::RewardMse, CompareAs::ScoreMse}) {
      const uint64_t s = seed + 31 * case_index;
      ++case_index;
      GradFixture fx = fixture_for(s);
      const Beta beta{kBetaGrid[case_index % 8]};
      std::vector<double> w(ExplicitRewardModel::trainable_bt(fx.num_prompts, fx.pi.vocab()).param_count());
      for (size_t i = 0; i < w.size(); ++i) w[i] = 2.0 * rng::uniform(s, kStreamReward, i) - 1.0;
      const ExplicitRewardModel rm =
          ExplicitRewardModel::trainable_bt_with_params(fx.num_prompts, fx.pi.vocab(), std::move(w));
      std::vector<SampledResponse> draws;
      for (size_t i = 0; i < 6; ++i) {
        const Prompt x{static_cast<uint32_t>(i % fx.num_prompts), {}};
        draws.push_back(SampledResponse{x, fx.pi.sample(x, rng::at(s, kStreamDraws, i))});
      }
      const Policy ref = fx.ref;
      const std::string name =
          std::string(cmp == CompareAs::RewardMse ? "grad_online_reward" : "grad_online_score") + suffix;
      grad_check(rep, name, fx.pi, [ref, beta, rm, draws, cmp](const Policy& pi) {
        return loss_una_online(pi, ref, beta, rm, draws, cmp);
      });
    }
  }

  // trainable reward model loss against the same oracle
  {
    const Vocab v{5, 1};
    auto set = ResponseSet::enumerate_all(v);
    std::vector<double> w(ExplicitRewardModel::trainable_bt(2, v).param_count());
    for (size_t i = 0; i < w.size(); ++i) w[i] = 2.0 * rng::uniform(seed, kStreamReward, 100 + i) - 1.0;
    const ExplicitRewardModel rm = ExplicitRewardModel::trainable_bt_with_params(2, v, std::move(w));
    const auto records = random_records(FeedbackKind::Pairwise, *set, 2, 8, seed + 7);
    const LossResult res = rm_loss(rm, records);
    const std::vector<double> fd = oracle::finite_diff_grad(
        [&](const std::vector<double>& p) {
          return rm_loss(ExplicitRewardModel::trainable_bt_with_params(2, v, p), records).value;
        },
        rm.params());
    const double err = oracle::max_rel_error(res.grad, fd);
    add(rep, "grad_rm_bt", err < 1e-4, err, 1e-4);
  }
}

// --- equivalence -------------------------------------------------------------

void equivalence_checks(SuiteReport& rep, uint64_t seed, unsigned threads,
                        const std::string& replay_dir) {
  (void)replay_dir;
  {
    const auto diffs = sweep<std::array<double, 2>>(100, threads, [&](size_t i) {
      const uint64_t s = seed + 101 * i;
      GradFixture fx = i % 2 ? parametric_fixture(s) : tabular_fixture(s);
      const Beta beta{kBetaGrid[i % 8]};
      const auto records = random_records(FeedbackKind::Pairwise, *fx.set, fx.num_prompts, 5, s + 1);
      const LossResult a = loss_dpo(fx.pi, fx.ref, beta, records);
      const LossResult b = loss_una_pair(fx.pi, fx.ref, beta, records, true);
      double grad_diff = 0.0;
      for (size_t k = 0; k < a.grad.size(); ++k) {
        grad_diff = std::max(grad_diff, std::abs(a.grad[k] - b.grad[k]));
      }
      return std::array<double, 2>{std::abs(a.value - b.value), grad_diff};
    });
    double value_diff = 0.0, grad_diff = 0.0;
    for (const auto& d : diffs) {
      value_diff = std::max(value_diff, d[0]);
      grad_diff = std::max(grad_diff, d[1]);
    }
    add(rep, "dpo_shaped_pair_value_agreement", value_diff <= 1e-12, value_diff, 1e-12,
        "100 random triples");
    add(rep, "dpo_shaped_pair_grad_agreement", grad_diff <= 1e-10, grad_diff, 1e-10,
        "100 random triples");
  }
  {
    GradFixture fx = tabular_fixture(seed + 5);
    const Beta beta{0.1};
    double worst = 0.0;
    const struct {
      FeedbackKind kind;
      std::function<double(std::span<const FeedbackRecord>)> value;
    } kinds[] = {
        {FeedbackKind::Pairwise,
         [&](std::span<const FeedbackRecord> d) { return loss_una_pair(fx.pi, fx.ref, beta, d, true).value; }},
        {FeedbackKind::Binary,
         [&](std::span<const FeedbackRecord> d) {
           return loss_una_binary(fx.pi, fx.ref, beta, d, DifferenceLoss::Mse).value;
         }},
        {FeedbackKind::Scalar,
         [&](std::span<const FeedbackRecord> d) {
           return loss_una_score(fx.pi, fx.ref, beta, d, ScoreBounds{1.0, 5.0}).value;
         }},
    };
    for (const auto& k : kinds) {
      const auto all = random_records(k.kind, *fx.set, fx.num_prompts, 7, seed + 17);
      const std::span<const FeedbackRecord> whole(all);
      const double joint = k.value(whole);
      const double head = k.value(whole.subspan(0, 4));
      const double tail = k.value(whole.subspan(4));
      worst = std::max(worst, std::abs(joint - (4.0 * head + 3.0 * tail) / 7.0));
    }
    add(rep, "batch_linearity", worst <= 1e-12, worst, 1e-12, "pairwise, binary, scalar");
  }
  {
    GradFixture fx = tabular_fixture(seed + 23);
    const Beta beta{0.3};
    const auto records = random_records(FeedbackKind::Pairwise, *fx.set, fx.num_prompts, 9, seed + 29);
    const LossResult res = loss_una_pair(fx.pi, fx.ref, beta, records, false);
    double mean_margin = 0.0;
    for (const FeedbackRecord& rec : records) {
      mean_margin += implicit_reward(fx.pi, fx.ref, beta, rec.x, rec.chosen) -
                     implicit_reward(fx.pi, fx.ref, beta, rec.x, rec.rejected);
    }
    mean_margin /= static_cast<double>(records.size());
    const double diff = std::abs(res.value + mean_margin);
    add(rep, "unshaped_is_negated_mean_margin", diff <= 1e-12, diff, 1e-12);
  }
  {
    // extreme saturation: the clamped cross-entropy must stay finite
    const Vocab v{2, 1};
    auto set = ResponseSet::enumerate_all(v);
    const std::vector<uint32_t> ids{0};
    const Policy ref = Policy::uniform_tabular(ids, set).frozen_clone();
    const Policy pi = Policy::tabular(ids, set, {2000.0, 0.0});
    const Beta beta{1.0};
    std::vector<FeedbackRecord> recs;
    recs.push_back(FeedbackRecord::binary(Prompt{0, {}}, set->at(1), BinaryLabel::Desired));
    recs.push_back(FeedbackRecord::binary(Prompt{0, {}}, set->at(0), BinaryLabel::Undesired));
    const LossResult res = loss_una_binary(pi, ref, beta, recs, DifferenceLoss::Bce);
    bool finite = std::isfinite(res.value);
    for (double g : res.grad) finite = finite && std::isfinite(g);
    add(rep, "bce_finite_under_saturation", finite, res.value, 0.0,
        "implicit reward magnitude ~2000");
  }
}

// --- oracle ------------------------------------------------------------------

void oracle_checks(SuiteReport& rep, uint64_t seed, unsigned threads,
                   const std::string& replay_dir) {
  (void)replay_dir;
  {
    const auto inst = random_instance(seed, 3, 5, 0.5, 0.0);  // amp 0 => reward identically 0
    const Policy star = oracle::optimal_policy_closed_form(inst);
    double worst = 0.0;
    for (const Prompt& x : inst.prompts) {
      for (size_t i = 0; i < inst.responses->size(); ++i) {
        worst = std::max(worst, std::abs(std::exp(star.log_prob(x, inst.responses->at(i))) -
                                         std::exp(inst.ref.log_prob(x, inst.responses->at(i)))));
      }
    }
    add(rep, "zero_reward_recovers_reference", worst <= 1e-12, worst, 1e-12);
  }
  {
    auto base = random_instance(seed + 1, 2, 4, 0.7, 0.0);
    std::vector<ExplicitRewardModel::TableEntry> entries;
    for (const auto& [key, r] : base.reward.entries()) {
      entries.push_back({key.first, Response{key.second}, r + 2.5});
    }
    const oracle::TabularInstance inst{base.prompts, base.responses, base.ref,
                                       ExplicitRewardModel::table(std::move(entries)), base.beta};
    const Policy star = oracle::optimal_policy_closed_form(inst);
    double worst = 0.0;
    for (const Prompt& x : inst.prompts) {
      for (size_t i = 0; i < inst.responses->size(); ++i) {
        worst = std::max(worst, std::abs(std::exp(star.log_prob(x, inst.responses->at(i))) -
                                         std::exp(inst.ref.log_prob(x, inst.responses->at(i)))));
      }
    }
    add(rep, "constant_reward_recovers_reference", worst <= 1e-12, worst, 1e-12);
  }
  {
    const auto inst = two_response_instance(1.0, 0.0, 1.0);
    const Policy star = oracle::optimal_policy_closed_form(inst);
    const double e = std::exp(1.0);
    const double p0 = std::exp(star.log_prob(inst.prompts[0], inst.responses->at(0)));
    const double p1 = std::exp(star.log_prob(inst.prompts[0], inst.responses->at(1)));
    const double worst = std::max(std::abs(p0 - e / (e + 1.0)), std::abs(p1 - 1.0 / (e + 1.0)));
    add(rep, "two_response_tilt_value", worst <= 1e-12, worst, 1e-12,
        "expected (e, 1)/(e+1)");
  }
  {
    const auto sums = sweep<double>(50, threads, [&](size_t s) {
      const auto inst = random_instance(3000 + s, 3, 5, kBetaGrid[3 + s % 4], 1.0);
      const Policy star = oracle::optimal_policy_closed_form(inst);
      double worst = 0.0;
      for (const Prompt& x : inst.prompts) {
        double sum = 0.0;
        for (size_t i = 0; i < inst.responses->size(); ++i) {
          sum += std::exp(star.log_prob(x, inst.responses->at(i)));
        }
        worst = std::max(worst, std::abs(sum - 1.0));
      }
      return worst;
    });
    const double worst = *std::max_element(sums.begin(), sums.end());
    add(rep, "tilt_rows_normalized", worst <= 1e-12, worst, 1e-12, "50 instances");
  }
  {
    const auto inst = random_instance(seed + 4, 3, 6, 0.3, 1.0);
    double expected = 0.0;
    for (const Prompt& x : inst.prompts) {
      for (size_t i = 0; i < inst.responses->size(); ++i) {
        expected += std::exp(inst.ref.log_prob(x, inst.responses->at(i))) *
                    inst.reward.reward(x, inst.responses->at(i));
      }
    }
    expected /= static_cast<double>(inst.prompts.size());
    const double got = oracle::evaluate_objective(inst, inst.ref);
    add(rep, "objective_at_reference", std::abs(got - expected) <= 1e-12,
        std::abs(got - expected), 1e-12, "KL term vanishes");
  }
  {
    const auto inst = random_instance(seed + 5, 3, 5, 0.4, 0.0);
    const Policy pi = random_policy_for(inst, seed + 6, 1.5);
    const double j = oracle::evaluate_objective(inst, pi);
    double mean_kl = 0.0;
    for (const Prompt& x : inst.prompts) mean_kl += kl_divergence(pi, inst.ref, x);
    mean_kl /= static_cast<double>(inst.prompts.size());
    const double diff = std::abs(j + inst.beta.value * mean_kl);
    add(rep, "zero_reward_objective_is_penalty", j <= 1e-15 && diff <= 1e-12, diff, 1e-12,
        "objective equals -beta * KL");
  }
  {
    const auto inst = two_response_instance(1.0, 0.0, 1.0);
    const Policy star = oracle::optimal_policy_closed_form(inst);
    const double expected = std::log(std::exp(1.0) + 1.0) - std::log(2.0);
    const double got = oracle::evaluate_objective(inst, star);
    add(rep, "two_response_optimum_value", std::abs(got - expected) <= 1e-10,
        std::abs(got - expected), 1e-10, "beta * log Z");
  }
  {
    const auto inst = random_instance(seed + 8, 2, 5, 0.25, 1.0);
    const auto gap = oracle::recovered_reward_gap(inst, inst.ref);
    double worst = 0.0;
    for (size_t p = 0; p < inst.prompts.size(); ++p) {
      double mean = 0.0;
      for (size_t i = 0; i < inst.responses->size(); ++i) {
        mean += inst.reward.reward(inst.prompts[p], inst.responses->at(i));
      }
      mean /= static_cast<double>(inst.responses->size());
      double expect_dev = 0.0;
      for (size_t i = 0; i < inst.responses->size(); ++i) {
        expect_dev = std::max(expect_dev,
                              std::abs(inst.reward.reward(inst.prompts[p], inst.responses->at(i)) - mean));
      }
      worst = std::max(worst, std::abs(gap.max_abs_deviation[p] - expect_dev));
    }
    add(rep, "gap_at_reference_equals_reward_spread", worst <= 1e-12, worst, 1e-12);
  }
  {
    const auto inst = random_instance(seed + 9, 3, 5, 0.6, 1.0);
    const Policy star = oracle::optimal_policy_closed_form(inst);
    const auto gap = oracle::recovered_reward_gap(inst, star);
    double worst = 0.0;
    for (size_t p = 0; p < gap.lambda.size(); ++p) {
      worst = std::max(worst, std::abs(gap.lambda[p] - gap.z[p]) / gap.z[p]);
    }
    add(rep, "lambda_matches_partition_at_optimum", worst <= 1e-9, worst, 1e-9);
  }
  {
    const auto inst = random_instance(seed + 10, 2, 4, 0.8, 1.0);
    const auto dir = std::filesystem::temp_directory_path() / "una_verify_round_trip.json";
    inst.save(dir.string());
    const auto loaded = oracle::TabularInstance::load(dir.string());
    double worst = 0.0;
    for (size_t i = 0; i < inst.ref.params().size(); ++i) {
      worst = std::max(worst, std::abs(inst.ref.params()[i] - loaded.ref.params()[i]));
    }
    for (const Prompt& x : inst.prompts) {
      for (size_t i = 0; i < inst.responses->size(); ++i) {
        worst = std::max(worst, std::abs(inst.reward.reward(x, inst.responses->at(i)) -
                                         loaded.reward.reward(x, inst.responses->at(i))));
      }
    }
    worst = std::max(worst, std::abs(inst.beta.value - loaded.beta.value));
    std::filesystem::remove(dir);
    add(rep, "instance_json_round_trip", worst == 0.0, worst, 0.0, "byte-exact values");
  }
  {
    const std::vector<double> fd = oracle::finite_diff_grad(
        [](const std::vector<double>& p) { return p[0] * p[0] + p[1] * p[1]; }, {1.0, -2.0});
    const double worst = std::max(std::abs(fd[0] - 2.0), std::abs(fd[1] + 4.0));
    add(rep, "finite_diff_quadratic", worst <= 1e-9, worst, 1e-9);
  }
  {
    const std::vector<double> fd = oracle::finite_diff_grad(
        [](const std::vector<double>&) { return 3.25; }, {0.4, -1.1, 2.0});
    double worst = 0.0;
    for (double g : fd) worst = std::max(worst, std::abs(g));
    add(rep, "finite_diff_constant", worst <= 1e-9, worst, 1e-9);
  }
}

}  // namespace

bool SuiteReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

Suite parse_suite(const std::string& name) {
  if (name == "proofs") return Suite::Proofs;
  if (name == "gradients") return Suite::Gradients;
  if (name == "equivalence") return Suite::Equivalence;
  if (name == "oracle") return Suite::Oracle;
  if (name == "all") return Suite::All;
  throw ValidationError("unknown suite: " + name);
}

std::string suite_name(Suite suite) {
  switch (suite) {
    case Suite::Proofs: return "proofs";
    case Suite::Gradients: return "gradients";
    case Suite::Equivalence: return "equivalence";
    case Suite::Oracle: return "oracle";
    case Suite::All: return "all";
  }
  return "all";
}

SuiteReport run_suite(Suite suite, uint64_t seed, unsigned threads, const std::string& replay_dir) {
  SuiteReport rep;
  if (suite == Suite::Proofs || suite == Suite::All) proofs_checks(rep, seed, threads, replay_dir);
  if (suite == Suite::Gradients || suite == Suite::All) gradients_checks(rep, seed, threads, replay_dir);
  if (suite == Suite::Equivalence || suite == Suite::All) equivalence_checks(rep, seed, threads, replay_dir);
  if (suite == Suite::Oracle || suite == Suite::All) oracle_checks(rep, seed, threads, replay_dir);
  return rep;
}

void print_report(const SuiteReport& report, std::ostream& out) {
  size_t width = 4;
  for (const CheckResult& c : report.checks) width = std::max(width, c.name.size());
  char buf[64];
  for (const CheckResult& c : report.checks) {
    out << (c.pass ? "PASS  " : "FAIL  ") << c.name;
    for (size_t i = c.name.size(); i < width + 2; ++i) out << ' ';
    std::snprintf(buf, sizeof buf, "observed %-13.6g bound %-10.3g", c.observed, c.bound);
    out << buf;
    if (!c.detail.empty()) out << "  " << c.detail;
    out << "\n";
  }
}

oracle::TabularInstance random_instance(uint64_t seed, uint32_t num_prompts,
                                        uint32_t num_responses, double beta, double reward_amp) {
  if (num_prompts == 0) throw ValidationError("instance needs at least one prompt");
  if (num_responses < 2) throw ValidationError("instance needs at least two responses");
  if (!(reward_amp >= 0.0) || !std::isfinite(reward_amp)) {
    throw ValidationError("reward amplitude must be finite and non-negative");
  }
  const Vocab v{num_responses, 1};
  auto set = ResponseSet::enumerate_all(v);
  std::vector<uint32_t> ids(num_prompts);
  std::vector<Prompt> prompts(num_prompts);
  for (uint32_t p = 0; p < num_prompts; ++p) {
    ids[p] = p;
    prompts[p] = Prompt{p, {}};
  }
  Policy ref = Policy::random_tabular(ids, set, rng::at(seed, kStreamRefInit, 0), 0.5).frozen_clone();
  std::vector<ExplicitRewardModel::TableEntry> entries;
  for (uint32_t p = 0; p < num_prompts; ++p) {
    for (size_t i = 0; i < set->size(); ++i) {
      const double r = reward_amp * rng::uniform(seed, kStreamReward, p * set->size() + i);
      entries.push_back({p, set->at(i), r});
    }
  }
  return oracle::TabularInstance{std::move(prompts), std::move(set), std::move(ref),
                                 ExplicitRewardModel::table(std::move(entries)), Beta(beta)};
}

oracle::TabularInstance two_response_instance(double r0, double r1, double beta) {
  const Vocab v{2, 1};
  auto set = ResponseSet::enumerate_all(v);
  Policy ref = Policy::uniform_tabular({0}, set).frozen_clone();
  std::vector<ExplicitRewardModel::TableEntry> entries{
      {0, set->at(0), r0},
      {0, set->at(1), r1},
  };
  return oracle::TabularInstance{{Prompt{0, {}}}, std::move(set), std::move(ref),
                                 ExplicitRewardModel::table(std::move(entries)), Beta(beta)};
}

}  // namespace una::verify
