#include <cmath>
#include <filesystem>
#include <vector>

#include "una/oracle.hpp"
#include "una/verify.hpp"
#include "vendor/doctest.h"

using namespace una;

namespace {

oracle::TabularInstance two_by_two(double r0, double r1, double beta) {
  return verify::two_response_instance(r0, r1, beta);
}

}  // namespace

TEST_CASE("zero reward makes the tilt a no-op") {
  auto inst = two_by_two(0.0, 0.0, 1.0);
  CHECK(oracle::log_partition(inst, 0) == doctest::Approx(0.0).epsilon(1e-15));
  const Policy opt = oracle::optimal_policy_closed_form(inst);
  for (size_t i = 0; i < inst.responses->size(); ++i) {
    CHECK(opt.log_prob(inst.prompts[0], inst.responses->at(i)) ==
          doctest::Approx(inst.ref.log_prob(inst.prompts[0], inst.responses->at(i)))
              .epsilon(1e-12));
  }
  CHECK(oracle::evaluate_objective(inst, opt) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("constant rewards shift the partition but not the tilt") {
  auto inst = two_by_two(2.5, 2.5, 0.5);
  CHECK(oracle::log_partition(inst, 0) == doctest::Approx(2.5 / 0.5).epsilon(1e-12));
  const Policy opt = oracle::optimal_policy_closed_form(inst);
  CHECK(std::exp(opt.log_prob(inst.prompts[0], inst.responses->at(0))) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("two response tilt hand value") {
  auto inst = two_by_two(1.0, 0.0, 1.0);
  const Policy opt = oracle::optimal_policy_closed_form(inst);
  const double p0 = std::exp(opt.log_prob(inst.prompts[0], inst.responses->at(0)));
  CHECK(p0 == doctest::Approx(0.7310585786300049).epsilon(1e-12));  // e / (e + 1)
  CHECK(opt.frozen());

  // the optimum value is beta * mean log partition
  const double jstar = oracle::evaluate_objective(inst, opt);
  CHECK(jstar == doctest::Approx(std::log(std::exp(1.0) + 1.0) - std::log(2.0)).epsilon(1e-10));
  CHECK(jstar == doctest::Approx(oracle::log_partition(inst, 0)).epsilon(1e-10));

  // no policy in a small sweep beats it
  for (uint64_t s = 0; s < 50; ++s) {
    const Policy cand = Policy::random_tabular({0}, inst.responses, s, 2.0);
    CHECK(oracle::evaluate_objective(inst, cand) <= jstar + 1e-12);
  }
}

TEST_CASE("objective decomposes into reward and divergence terms") {
  auto inst = verify::random_instance(23, 3, 5, 0.3, 1.0);
  const Policy pi = Policy::random_tabular({0, 1, 2}, inst.responses, 4, 1.0);
  double expect = 0.0;
  for (size_t p = 0; p < inst.prompts.size(); ++p) {
    const auto probs = response_probabilities(pi, inst.prompts[p], *inst.responses);
    double er = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      er += probs[i] * inst.reward.reward(inst.prompts[p], inst.responses->at(i));
    }
    expect += er - inst.beta.value * kl_divergence(pi, inst.ref, inst.prompts[p]);
  }
  expect /= static_cast<double>(inst.prompts.size());
  CHECK(oracle::evaluate_objective(inst, pi) == doctest::Approx(expect).epsilon(1e-12));

  // with zero reward the objective is the pure divergence penalty
  auto zero = inst;
  std::vector<ExplicitRewardModel::TableEntry> entries;
  for (const auto& x : inst.prompts) {
    for (size_t i = 0; i < inst.responses->size(); ++i) {
      entries.push_back({x.id, inst.responses->at(i), 0.0});
    }
  }
  zero.reward = ExplicitRewardModel::table(std::move(entries));
  double penalty = 0.0;
  for (const auto& x : inst.prompts) penalty += kl_divergence(pi, zero.ref, x);
  penalty *= -zero.beta.value / static_cast<double>(inst.prompts.size());
  CHECK(oracle::evaluate_objective(zero, pi) == doctest::Approx(penalty).epsilon(1e-12));
}

TEST_CASE("gap report is flat exactly at the optimum") {
  auto inst = verify::random_instance(5, 2, 6, 0.1, 0.8);
  const Policy opt = oracle::optimal_policy_closed_form(inst);
  const auto rep = oracle::recovered_reward_gap(inst, opt);
  REQUIRE(rep.gaps.size() == inst.prompts.size());
  for (size_t p = 0; p < inst.prompts.size(); ++p) {
    CHECK(rep.max_abs_deviation[p] < 1e-9);
    CHECK(rep.mean_gap[p] == doctest::Approx(inst.beta.value * rep.log_z[p]).epsilon(1e-9));
    CHECK(rep.lambda[p] == doctest::Approx(rep.z[p]).epsilon(1e-9));
  }

  // at the reference the gap rows are the rewards themselves
  const auto at_ref = oracle::recovered_reward_gap(inst, inst.ref);
  for (size_t p = 0; p < inst.prompts.size(); ++p) {
    for (size_t i = 0; i < inst.responses->size(); ++i) {
      CHECK(at_ref.gaps[p][i] ==
            doctest::Approx(inst.reward.reward(inst.prompts[p], inst.responses->at(i)))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("instance json round trips through disk") {
  const auto path = std::filesystem::temp_directory_path() / "una_test_instance.json";
  auto inst = verify::random_instance(9, 2, 4, 0.03, 0.5);
  inst.save(path.string());
  const auto back = oracle::TabularInstance::load(path.string());
  CHECK(back.beta.value == inst.beta.value);
  CHECK(back.prompts.size() == inst.prompts.size());
  CHECK(back.responses->same_responses(*inst.responses));
  CHECK(back.ref.params() == inst.ref.params());
  for (const auto& x : inst.prompts) {
    for (size_t i = 0; i < inst.responses->size(); ++i) {
      CHECK(back.reward.reward(x, inst.responses->at(i)) ==
            inst.reward.reward(x, inst.responses->at(i)));
    }
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(oracle::TabularInstance::load("/nonexistent/inst.json"), MissingArtifact);
}

TEST_CASE("log sum inequality holds with equality iff proportional") {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> b{2.0, 4.0, 6.0};
  auto prop = oracle::check_log_sum_inequality(a, b);
  CHECK(prop.holds);
  CHECK(prop.equality);
  CHECK(prop.slack == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<double> b2{1.0, 1.0, 1.0};
  auto strict = oracle::check_log_sum_inequality(a, b2);
  CHECK(strict.holds);
  CHECK_FALSE(strict.equality);
  CHECK(strict.slack > 0.0);

  // the worked two-term case: a = (1, 3), b = (2, 2)
  const std::vector<double> a3{1.0, 3.0};
  const std::vector<double> b3{2.0, 2.0};
  auto two = oracle::check_log_sum_inequality(a3, b3);
  CHECK(two.slack == doctest::Approx(0.5232481437645478).epsilon(1e-12));

  CHECK_THROWS_AS(oracle::check_log_sum_inequality(a, std::vector<double>{1.0}),
                  DimensionMismatch);
  CHECK_THROWS_AS(oracle::check_log_sum_inequality(a, std::vector<double>{1.0, -1.0, 1.0}),
                  NonPositiveDenominator);
}

TEST_CASE("jensen inequality for t log t") {
  const std::vector<double> w{0.5, 0.5};
  const std::vector<double> equal{2.0, 2.0};
  auto eq = oracle::check_jensen(w, equal);
  CHECK(eq.holds);
  CHECK(eq.equality);

  const std::vector<double> pts{1.0, std::exp(1.0)};
  auto strict = oracle::check_jensen(w, pts);
  CHECK(strict.holds);
  CHECK_FALSE(strict.equality);
  const double m = (1.0 + std::exp(1.0)) / 2.0;
  CHECK(strict.slack ==
        doctest::Approx(std::exp(1.0) / 2.0 - m * std::log(m)).epsilon(1e-12));

  CHECK_THROWS_AS(oracle::check_jensen(std::vector<double>{0.0, 0.0}, equal), NonPositiveInput);
}

TEST_CASE("finite differences recover simple gradients") {
  auto quad = [](const std::vector<double>& p) { return p[0] * p[0] + 2.0 * p[1]; };
  const auto g = oracle::finite_diff_grad(quad, {1.0, -2.0});
  REQUIRE(g.size() == 2);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(g[1] == doctest::Approx(2.0).epsilon(1e-9));

  auto constant = [](const std::vector<double>&) { return 3.5; };
  for (double gi : oracle::finite_diff_grad(constant, {0.1, 0.2, 0.3})) {
    CHECK(gi == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("max rel error normalizes by the larger magnitude") {
  const std::vector<double> a{1.0, 100.0};
  const std::vector<double> b{1.0, 101.0};
  CHECK(oracle::max_rel_error(a, b) == doctest::Approx(1.0 / 101.0).epsilon(1e-12));
  const std::vector<double> c{0.0, 0.0};
  CHECK(oracle::max_rel_error(c, c) == 0.0);
  CHECK_THROWS_AS(oracle::max_rel_error(a, std::vector<double>{1.0}), DimensionMismatch);
}

TEST_CASE("instance validation catches inconsistent pieces") {
  auto inst = verify::random_instance(2, 2, 3, 0.1, 1.0);
  CHECK_NOTHROW(inst.validate());
  auto broken = inst;
  broken.ref = Policy::uniform_tabular({0, 1}, inst.responses);  // not frozen
  CHECK_THROWS_AS(broken.validate(), NonFrozenReference);
}
