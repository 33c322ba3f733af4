#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "una/policy.hpp"
#include "una/reward.hpp"

namespace una::oracle {

// A fully enumerated alignment problem: prompts, candidate responses, a
// frozen tabular reference, a reward table covering every (prompt, response)
// pair, and a temperature. Small enough that optima, objectives, and
// partition functions are computed exactly.
struct TabularInstance {
  std::vector<Prompt> prompts;
  std::shared_ptr<const ResponseSet> responses;
  Policy ref;
  ExplicitRewardModel reward;
  Beta beta;

  void validate() const;

  void save(const std::string& path) const;
  static TabularInstance load(const std::string& path);
};

// log of the partition value Z(x) = sum_y ref(y|x) * exp(r(x,y) / beta),
// evaluated with a max shift so large tilts stay finite.
double log_partition(const TabularInstance& inst, size_t prompt_index);

// The exact maximizer of expected reward minus beta-weighted divergence from
// the reference: pi*(y|x) = ref(y|x) * exp(r(x,y)/beta) / Z(x). Returned as a
// frozen tabular policy whose logits are the log-probabilities themselves.
Policy optimal_policy_closed_form(const TabularInstance& inst);

// J(pi) = mean over prompts of E_{y~pi}[r(x,y)] - beta * KL(pi || ref).
double evaluate_objective(const TabularInstance& inst, const Policy& pi);

// gaps[x][y] = r(x,y) - beta * log(pi(y|x) / ref(y|x)). At the optimum every
// row is constant at beta * log Z(x); mean_gap estimates that prompt shift
// and max_abs_deviation measures how far the row is from flat. lambda[x] =
// exp(mean_gap[x] / beta) recovers the partition mass, and lambda_estimate
// averages it over prompts.
struct GapReport {
  std::vector<std::vector<double>> gaps;
  std::vector<double> mean_gap;
  std::vector<double> max_abs_deviation;
  std::vector<double> z;
  std::vector<double> log_z;
  std::vector<double> lambda;
  double lambda_estimate = 0.0;
};

GapReport recovered_reward_gap(const TabularInstance& inst, const Policy& pi);

// sum_i a_i * log(a_i / b_i) >= (sum a) * log(sum a / sum b) for a_i >= 0,
// b_i > 0, with equality iff a_i / b_i is constant. slack = lhs - rhs.
struct InequalityCheck {
  bool holds = false;
  double slack = 0.0;
  bool equality = false;
};

InequalityCheck check_log_sum_inequality(std::span<const double> a, std::span<const double> b);

// Jensen for f(t) = t * log t: weighted mean of f(points) >= f(weighted mean).
// Weights must be non-negative with positive sum; points must be positive.
InequalityCheck check_jensen(std::span<const double> weights, std::span<const double> points);

// Central-difference gradient of an arbitrary scalar function of a parameter
// vector. The yardstick every analytic gradient in the library is checked
// against.
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& fn,
                                     std::vector<double> params, double eps = 1e-5);

// |a - b| / max(1, |a|, |b|), maximized over entries.
double max_rel_error(std::span<const double> a, std::span<const double> b);

}  // namespace una::oracle
