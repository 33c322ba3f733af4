#include "una/reward.hpp"

#include <cmath>
#include <fstream>

#include "vendor/json.hpp"

namespace una {

void Beta::validate() const {
  if (!std::isfinite(value) || value <= 0.0) throw ValidationError("beta must be a finite positive number");
}

void ScoreBounds::validate() const {
  if (!std::isfinite(min_raw) || !std::isfinite(max_raw)) throw ValidationError("score bounds must be finite");
  if (!(max_raw > min_raw)) throw ValidationError("score bounds must satisfy max_raw > min_raw");
}

double normalize_score(double raw, const ScoreBounds& bounds) {
  bounds.validate();
  if (!std::isfinite(raw) || raw < bounds.min_raw || raw > bounds.max_raw) {
    throw OutOfRange("raw score outside [" + std::to_string(bounds.min_raw) + ", " +
                     std::to_string(bounds.max_raw) + "]");
  }
  return (raw - bounds.min_raw) / (bounds.max_raw - bounds.min_raw);
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) {
  // -softplus(-z), split so the exp argument is never positive
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

double bt_probability(double reward_a, double reward_b) {
  if (!std::isfinite(reward_a) || !std::isfinite(reward_b)) {
    throw NonFiniteReward("comparison probability needs finite rewards");
  }
  return sigmoid(reward_a - reward_b);
}

double implicit_reward(const Policy& pi, const Policy& ref, Beta beta,
                       const Prompt& x, const Response& y) {
  beta.validate();
  if (!ref.frozen()) throw NonFrozenReference("reference policy must be frozen");
  return beta.value * (pi.log_prob(x, y) - ref.log_prob(x, y));
}

double implicit_score(const Policy& pi, const Policy& ref, Beta beta,
                      const Prompt& x, const Response& y) {
  return sigmoid(implicit_reward(pi, ref, beta, x, y));
}

// --- ExplicitRewardModel -----------------------------------------------------

ExplicitRewardModel ExplicitRewardModel::table(std::vector<TableEntry> entries) {
  ExplicitRewardModel rm;
  rm.kind_ = Kind::Table;
  for (auto& e : entries) {
    if (!std::isfinite(e.reward)) throw ValidationError("table rewards must be finite");
    auto [it, inserted] = rm.table_.emplace(std::make_pair(e.prompt_id, e.response.tokens), e.reward);
    if (!inserted) throw ValidationError("duplicate (prompt, response) entry in reward table");
  }
  return rm;
}

ExplicitRewardModel ExplicitRewardModel::trainable_bt(uint32_t num_prompts, const Vocab& v) {
  return trainable_bt_with_params(num_prompts, v,
                                  std::vector<double>(size_t{num_prompts} * v.size, 0.0));
}

ExplicitRewardModel ExplicitRewardModel::trainable_bt_with_params(uint32_t num_prompts, const Vocab& v,
                                                                  std::vector<double> weights) {
  v.validate();
  if (num_prompts == 0) throw ValidationError("trainable reward model needs at least one prompt");
  if (weights.size() != size_t{num_prompts} * v.size) {
    throw DimensionMismatch("reward model weights have the wrong size");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw ValidationError("reward model weights must be finite");
  }
  ExplicitRewardModel rm;
  rm.kind_ = Kind::TrainableBt;
  rm.num_prompts_ = num_prompts;
  rm.vocab_ = v;
  rm.weights_ = std::move(weights);
  return rm;
}

double ExplicitRewardModel::reward(const Prompt& x, const Response& y) const {
  if (kind_ == Kind::Table) {
    auto it = table_.find(std::make_pair(x.id, y.tokens));
    if (it == table_.end()) {
      throw MissingEntry("no reward entry for prompt " + std::to_string(x.id));
    }
    return it->second;
  }
  validate_response(vocab_, y);
  if (x.id >= num_prompts_) throw UnknownPrompt("prompt id " + std::to_string(x.id) + " not covered by this reward model");
  double r = 0.0;
  for (uint32_t tok : y.tokens) r += weights_[size_t{x.id} * vocab_.size + tok];
  return r;
}

size_t ExplicitRewardModel::param_count() const {
  if (kind_ != Kind::TrainableBt) throw NonTrainableModel("reward table has no parameters");
  return weights_.size();
}

const std::vector<double>& ExplicitRewardModel::params() const {
  if (kind_ != Kind::TrainableBt) throw NonTrainableModel("reward table has no parameters");
  return weights_;
}

std::vector<double> ExplicitRewardModel::features(const Prompt& x, const Response& y) const {
  if (kind_ != Kind::TrainableBt) throw NonTrainableModel("reward table has no feature map");
  validate_response(vocab_, y);
  if (x.id >= num_prompts_) throw UnknownPrompt("prompt id " + std::to_string(x.id) + " not covered by this reward model");
  std::vector<double> phi(weights_.size(), 0.0);
  for (uint32_t tok : y.tokens) phi[size_t{x.id} * vocab_.size + tok] += 1.0;
  return phi;
}

void ExplicitRewardModel::accumulate_reward_grad(const Prompt& x, const Response& y, double coeff,
                                                 std::span<double> grad) const {
  if (kind_ != Kind::TrainableBt) throw NonTrainableModel("reward table has no parameters");
  if (grad.size() != weights_.size()) throw DimensionMismatch("gradient buffer has the wrong size");
  validate_response(vocab_, y);
  if (x.id >= num_prompts_) throw UnknownPrompt("prompt id " + std::to_string(x.id) + " not covered by this reward model");
  for (uint32_t tok : y.tokens) grad[size_t{x.id} * vocab_.size + tok] += coeff;
}

ExplicitRewardModel ExplicitRewardModel::apply_gradient(std::span<const double> grad,
                                                        double step_size) const {
  if (kind_ != Kind::TrainableBt) throw NonTrainableModel("reward table has no parameters");
  if (grad.size() != weights_.size()) throw DimensionMismatch("gradient has the wrong size");
  if (!std::isfinite(step_size) || step_size < 0.0) throw ValidationError("step_size must be finite and non-negative");
  std::vector<double> next = weights_;
  for (size_t i = 0; i < next.size(); ++i) {
    if (!std::isfinite(grad[i])) throw NonFiniteGradient("gradient contains a non-finite entry");
    next[i] -= step_size * grad[i];
  }
  return trainable_bt_with_params(num_prompts_, vocab_, std::move(next));
}

ExplicitRewardModel ExplicitRewardModel::load_table_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open reward table: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("reward table is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array()) {
    throw SchemaError("reward table must be an object with an \"entries\" array");
  }
  std::vector<TableEntry> entries;
  for (const auto& e : j["entries"]) {
    try {
      TableEntry te;
      te.prompt_id = e.at("prompt").get<uint32_t>();
      te.response.tokens = e.at("tokens").get<std::vector<uint32_t>>();
      te.reward = e.at("reward").get<double>();
      entries.push_back(std::move(te));
    } catch (const nlohmann::json::exception& err) {
      throw SchemaError("bad reward table entry: " + std::string(err.what()));
    }
  }
  return table(std::move(entries));
}

void ExplicitRewardModel::save_table_json(const std::string& path) const {
  if (kind_ != Kind::Table) throw ValidationError("only reward tables serialize to JSON");
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, r] : table_) {
    entries.push_back({{"prompt", key.first}, {"tokens", key.second}, {"reward", r}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw MissingArtifact("cannot open reward table for writing: " + path);
  out << nlohmann::json{{"entries", std::move(entries)}}.dump(2) << "\n";
}

// --- reward model training loss ---------------------------------------------

LossResult rm_loss(const ExplicitRewardModel& rm, std::span<const FeedbackRecord> batch) {
  if (rm.kind() != ExplicitRewardModel::Kind::TrainableBt) {
    throw NonTrainableModel("reward table cannot be trained");
  }
  if (batch.empty()) throw EmptyBatch("loss needs at least one record");
  LossResult out;
  out.grad.assign(rm.param_count(), 0.0);
  out.per_record.reserve(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const FeedbackRecord& rec : batch) {
    if (rec.kind != FeedbackKind::Pairwise) throw WrongFeedbackKind("reward model training needs pairwise records");
    const double margin = rm.reward(rec.x, rec.chosen) - rm.reward(rec.x, rec.rejected);
    const double nll = -log_sigmoid(margin);
    out.per_record.push_back(nll);
    out.value += nll * inv_n;
    // d nll / d margin = -sigmoid(-margin)
    const double dmargin = -sigmoid(-margin) * inv_n;
    rm.accumulate_reward_grad(rec.x, rec.chosen, dmargin, out.grad);
    rm.accumulate_reward_grad(rec.x, rec.rejected, -dmargin, out.grad);
  }
  return out;
}

double rm_accuracy(const ExplicitRewardModel& rm, std::span<const FeedbackRecord> batch) {
  if (batch.empty()) throw EmptyBatch("accuracy needs at least one record");
  size_t correct = 0;
  for (const FeedbackRecord& rec : batch) {
    if (rec.kind != FeedbackKind::Pairwise) throw WrongFeedbackKind("accuracy is defined for pairwise records");
    if (rm.reward(rec.x, rec.chosen) > rm.reward(rec.x, rec.rejected)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

}  // namespace una
