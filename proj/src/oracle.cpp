#include "una/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "vendor/json.hpp"

namespace una::oracle {

void TabularInstance::validate() const {
  beta.validate();
  if (!responses || responses->size() == 0) throw ValidationError("instance needs a response set");
  if (prompts.empty()) throw ValidationError("instance needs at least one prompt");
  if (ref.kind() != Policy::Kind::Tabular) throw ValidationError("instance reference must be tabular");
  if (!ref.frozen()) throw NonFrozenReference("instance reference must be frozen");
  if (!ref.response_set()->same_responses(*responses)) {
    throw VocabMismatch("reference is defined over a different candidate set");
  }
  for (const Prompt& x : prompts) {
    if (!ref.defined_on(x)) throw UnknownPrompt("reference does not cover prompt " + std::to_string(x.id));
    for (size_t i = 0; i < responses->size(); ++i) {
      reward.reward(x, responses->at(i));  // throws MissingEntry on gaps
    }
  }
}

double log_partition(const TabularInstance& inst, size_t prompt_index) {
  if (prompt_index >= inst.prompts.size()) throw ValidationError("prompt index out of range");
  const Prompt& x = inst.prompts[prompt_index];
  std::vector<double> logits(inst.responses->size());
  for (size_t i = 0; i < logits.size(); ++i) {
    const Response& y = inst.responses->at(i);
    const double tilt = inst.reward.reward(x, y) / inst.beta.value;
    if (!std::isfinite(tilt)) throw NonFiniteTilt("reward / beta is not finite");
    logits[i] = inst.ref.log_prob(x, y) + tilt;
  }
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  if (!(s > 0.0) || !std::isfinite(m + std::log(s))) {
    throw NonPositiveDenominator("partition value is not positive and finite");
  }
  return m + std::log(s);
}

Policy optimal_policy_closed_form(const TabularInstance& inst) {
  inst.validate();
  const size_t cols = inst.responses->size();
  std::vector<uint32_t> ids;
  ids.reserve(inst.prompts.size());
  std::vector<double> log_probs(inst.prompts.size() * cols);
  for (size_t p = 0; p < inst.prompts.size(); ++p) {
    const Prompt& x = inst.prompts[p];
    ids.push_back(x.id);
    const double log_z = log_partition(inst, p);
    for (size_t i = 0; i < cols; ++i) {
      const Response& y = inst.responses->at(i);
      const double tilt = inst.reward.reward(x, y) / inst.beta.value;
      log_probs[p * cols + i] = inst.ref.log_prob(x, y) + tilt - log_z;
    }
  }
  return Policy::tabular(std::move(ids), inst.responses, std::move(log_probs), /*frozen=*/true);
}

double evaluate_objective(const TabularInstance& inst, const Policy& pi) {
  inst.validate();
  double total = 0.0;
  for (const Prompt& x : inst.prompts) {
    const std::vector<double> probs = response_probabilities(pi, x, *inst.responses);
    double expected_reward = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      expected_reward += probs[i] * inst.reward.reward(x, inst.responses->at(i));
    }
    total += expected_reward - inst.beta.value * kl_divergence(pi, inst.ref, x);
  }
  const double value = total / static_cast<double>(inst.prompts.size());
  if (!std::isfinite(value)) throw NonFiniteEvaluation("objective evaluated to a non-finite value");
  return value;
}

GapReport recovered_reward_gap(const TabularInstance& inst, const Policy& pi) {
  inst.validate();
  GapReport report;
  report.gaps.reserve(inst.prompts.size());
  for (const Prompt& x : inst.prompts) {
    std::vector<double> row(inst.responses->size());
    for (size_t i = 0; i < row.size(); ++i) {
      const Response& y = inst.responses->at(i);
      const double log_ratio = pi.log_prob(x, y) - inst.ref.log_prob(x, y);
      row[i] = inst.reward.reward(x, y) - inst.beta.value * log_ratio;
    }
    double mean = 0.0;
    for (double g : row) mean += g;
    mean /= static_cast<double>(row.size());
    double max_dev = 0.0;
    for (double g : row) max_dev = std::max(max_dev, std::abs(g - mean));
    report.gaps.push_back(std::move(row));
    report.mean_gap.push_back(mean);
    report.max_abs_deviation.push_back(max_dev);
    report.lambda.push_back(std::exp(mean / inst.beta.value));
  }
  for (size_t p = 0; p < inst.prompts.size(); ++p) {
    const double log_z = log_partition(inst, p);
    const double z = std::exp(log_z);
    if (!(z > 0.0)) throw NonPositiveDenominator("partition value underflowed to zero");
    report.log_z.push_back(log_z);
    report.z.push_back(z);
  }
  double lam = 0.0;
  for (double l : report.lambda) lam += l;
  report.lambda_estimate = lam / static_cast<double>(report.lambda.size());
  return report;
}

InequalityCheck check_log_sum_inequality(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || a.size() != b.size()) throw DimensionMismatch("inputs must be non-empty and equally sized");
  double sum_a = 0.0, sum_b = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || a[i] < 0.0) throw NonPositiveInput("numerators must be finite and non-negative");
    if (!std::isfinite(b[i]) || b[i] <= 0.0) throw NonPositiveDenominator("denominators must be finite and positive");
    sum_a += a[i];
    sum_b += b[i];
  }
  double lhs = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) lhs += a[i] * std::log(a[i] / b[i]);
  }
  const double rhs = sum_a > 0.0 ? sum_a * std::log(sum_a / sum_b) : 0.0;
  InequalityCheck out;
  out.slack = lhs - rhs;
  out.holds = out.slack >= -1e-12;
  // equality iff the slack vanishes and a is proportional to b at ratio sum_a/sum_b
  double max_prop_dev = 0.0;
  const double ratio = sum_b > 0.0 ? sum_a / sum_b : 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    max_prop_dev = std::max(max_prop_dev, std::abs(a[i] - ratio * b[i]));
  }
  out.equality = out.slack <= 1e-10 && max_prop_dev <= 1e-9;
  return out;
}

InequalityCheck check_jensen(std::span<const double> weights, std::span<const double> points) {
  if (weights.empty() || weights.size() != points.size()) {
    throw DimensionMismatch("inputs must be non-empty and equally sized");
  }
  double total = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i]) || weights[i] <= 0.0) throw NonPositiveInput("weights must be finite and positive");
    if (!std::isfinite(points[i]) || points[i] <= 0.0) throw NonPositiveInput("points must be finite and positive");
    total += weights[i];
  }
  auto f = [](double t) { return t * std::log(t); };
  double mean_point = 0.0, mean_f = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i] / total;
    mean_point += w * points[i];
    mean_f += w * f(points[i]);
  }
  InequalityCheck out;
  out.slack = mean_f - f(mean_point);
  out.holds = out.slack >= -1e-12;
  out.equality = out.slack <= 1e-10;
  return out;
}

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& fn,
                                     std::vector<double> params, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("eps must be a finite positive number");
  std::vector<double> grad(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double hi = fn(params);
    params[i] = saved - eps;
    const double lo = fn(params);
    params[i] = saved;
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw NonFiniteEvaluation("loss evaluated to a non-finite value near the base point");
    }
    grad[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

double max_rel_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("gradient vectors differ in size");
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// --- instance serialization --------------------------------------------------

void TabularInstance::save(const std::string& path) const {
  validate();
  nlohmann::json j;
  j["format"] = "una-instance";
  j["version"] = 1;
  j["beta"] = beta.value;
  j["vocab"] = {{"size", responses->vocab().size}, {"max_len", responses->vocab().max_len}};
  nlohmann::json jp = nlohmann::json::array();
  for (const Prompt& x : prompts) jp.push_back({{"id", x.id}, {"tokens", x.tokens}});
  j["prompts"] = std::move(jp);
  nlohmann::json jr = nlohmann::json::array();
  for (size_t i = 0; i < responses->size(); ++i) jr.push_back(responses->at(i).tokens);
  j["responses"] = std::move(jr);
  j["ref_logits"] = ref.params();
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, r] : reward.entries()) {
    entries.push_back({{"prompt", key.first}, {"tokens", key.second}, {"reward", r}});
  }
  j["reward"] = {{"entries", std::move(entries)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw MissingArtifact("cannot open instance file for writing: " + path);
  out << j.dump(2) << "\n";
}

TabularInstance TabularInstance::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open instance file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("instance file is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (j.at("format").get<std::string>() != "una-instance") throw SchemaError("unrecognized instance format");
    Vocab v{j.at("vocab").at("size").get<uint32_t>(), j.at("vocab").at("max_len").get<uint32_t>()};
    Beta beta(j.at("beta").get<double>());
    std::vector<Prompt> prompts;
    for (const auto& p : j.at("prompts")) {
      prompts.push_back(Prompt{p.at("id").get<uint32_t>(), p.value("tokens", std::vector<uint32_t>{})});
    }
    std::vector<Response> resp;
    for (const auto& toks : j.at("responses")) resp.push_back(Response{toks.get<std::vector<uint32_t>>()});
    auto set = std::make_shared<const ResponseSet>(v, std::move(resp));
    std::vector<uint32_t> ids;
    for (const Prompt& x : prompts) ids.push_back(x.id);
    Policy ref = Policy::tabular(std::move(ids), set,
                                 j.at("ref_logits").get<std::vector<double>>(), /*frozen=*/true);
    std::vector<ExplicitRewardModel::TableEntry> entries;
    for (const auto& e : j.at("reward").at("entries")) {
      entries.push_back({e.at("prompt").get<uint32_t>(),
                         Response{e.at("tokens").get<std::vector<uint32_t>>()},
                         e.at("reward").get<double>()});
    }
    TabularInstance inst{std::move(prompts), std::move(set), std::move(ref),
                         ExplicitRewardModel::table(std::move(entries)), beta};
    inst.validate();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("instance file is missing fields: " + std::string(e.what()));
  }
}

}  // namespace una::oracle
