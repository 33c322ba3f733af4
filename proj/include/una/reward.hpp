#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "una/errors.hpp"
#include "una/feedback.hpp"
#include "una/policy.hpp"

namespace una {

// Strictly positive temperature of the implicit reward.
struct Beta {
  double value = 0.03;

  Beta() = default;
  explicit Beta(double v) : value(v) { validate(); }
  void validate() const;
};

// Raw annotation scale, mapped affinely onto [0, 1].
struct ScoreBounds {
  double min_raw = 1.0;
  double max_raw = 5.0;

  void validate() const;
};

double normalize_score(double raw, const ScoreBounds& bounds);

// Numerically stable logistic function and its log, split by sign so neither
// branch ever exponentiates a large positive argument.
double sigmoid(double z);
double log_sigmoid(double z);

// P(a beats b) = sigmoid(r_a - r_b). Rejects non-finite rewards.
double bt_probability(double reward_a, double reward_b);

// r(x,y) = beta * (log pi(y|x) - log ref(y|x)). The reference must be frozen.
double implicit_reward(const Policy& pi, const Policy& ref, Beta beta,
                       const Prompt& x, const Response& y);

// s(x,y) = sigmoid(r(x,y)), always in (0, 1).
double implicit_score(const Policy& pi, const Policy& ref, Beta beta,
                      const Prompt& x, const Response& y);

// An explicit reward model r(x,y), either a lookup table over enumerated
// (prompt, response) entries or a trainable linear model with
// prompt-one-hot x response-token-bag features (dimension num_prompts * vocab
// size; the terminator counts as a token).
class ExplicitRewardModel {
 public:
  enum class Kind { Table, TrainableBt };

  struct TableEntry {
    uint32_t prompt_id = 0;
    Response response;
    double reward = 0.0;
  };

  static ExplicitRewardModel table(std::vector<TableEntry> entries);
  static ExplicitRewardModel trainable_bt(uint32_t num_prompts, const Vocab& v);
  static ExplicitRewardModel trainable_bt_with_params(uint32_t num_prompts, const Vocab& v,
                                                      std::vector<double> weights);

  Kind kind() const { return kind_; }
  double reward(const Prompt& x, const Response& y) const;

  // Trainable surface; every call throws NonTrainableModel on a table.
  size_t param_count() const;
  const std::vector<double>& params() const;
  std::vector<double> features(const Prompt& x, const Response& y) const;
  void accumulate_reward_grad(const Prompt& x, const Response& y, double coeff,
                              std::span<double> grad) const;
  ExplicitRewardModel apply_gradient(std::span<const double> grad, double step_size) const;

  uint32_t num_prompts() const { return num_prompts_; }
  const Vocab& vocab() const { return vocab_; }
  const std::map<std::pair<uint32_t, std::vector<uint32_t>>, double>& entries() const { return table_; }

  // Table serialization: {"entries": [{"prompt": id, "tokens": [...], "reward": r}, ...]}
  static ExplicitRewardModel load_table_json(const std::string& path);
  void save_table_json(const std::string& path) const;

 private:
  ExplicitRewardModel() = default;

  Kind kind_ = Kind::Table;
  std::map<std::pair<uint32_t, std::vector<uint32_t>>, double> table_;
  uint32_t num_prompts_ = 0;
  Vocab vocab_;
  std::vector<double> weights_;
};

// Bradley-Terry cross-entropy over pairwise records, differentiated with
// respect to the trainable reward model's weights. Mean over the batch.
LossResult rm_loss(const ExplicitRewardModel& rm, std::span<const FeedbackRecord> batch);

// Fraction of pairs the model ranks correctly (ties count as wrong).
double rm_accuracy(const ExplicitRewardModel& rm, std::span<const FeedbackRecord> batch);

}  // namespace una
