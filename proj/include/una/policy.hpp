#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "una/errors.hpp"

namespace una {

// Token id 0 is reserved: it terminates every response.
inline constexpr uint32_t kEndOfSequence = 0;

// A response space small enough to enumerate exactly: token ids in
// [0, size), at most max_len content tokens before the terminator.
struct Vocab {
  uint32_t size = 2;
  uint32_t max_len = 1;

  void validate() const;
  bool operator==(const Vocab&) const = default;
};

// Number of distinct responses: sum over k in [0, max_len] of (size-1)^k.
uint64_t response_space_size(const Vocab& v);

struct Prompt {
  uint32_t id = 0;
  std::vector<uint32_t> tokens = {};
};

// Content tokens followed by the terminator. The terminator appears exactly
// once, at the end; validate_response enforces the shape against a vocab.
struct Response {
  std::vector<uint32_t> tokens;

  bool operator==(const Response& other) const { return tokens == other.tokens; }
};

void validate_response(const Vocab& v, const Response& y);

// Canonical order used everywhere a response list is materialized:
// shorter responses first, ties broken lexicographically by token id.
bool canonical_response_less(const Response& a, const Response& b);

// An explicit list of candidate responses over one vocab, in canonical
// order, with O(log n) membership lookup.
class ResponseSet {
 public:
  ResponseSet(const Vocab& v, std::vector<Response> responses);

  // Every valid response of the vocab, in canonical order.
  static std::shared_ptr<const ResponseSet> enumerate_all(const Vocab& v);

  size_t size() const { return responses_.size(); }
  const Response& at(size_t i) const { return responses_[i]; }
  const std::vector<Response>& responses() const { return responses_; }
  const Vocab& vocab() const { return vocab_; }
  bool full_enumeration() const { return full_; }

  std::optional<size_t> index_of(const Response& y) const;
  bool same_responses(const ResponseSet& other) const;

 private:
  Vocab vocab_;
  std::vector<Response> responses_;
  std::map<std::vector<uint32_t>, size_t> index_;
  bool full_ = false;
};

// An exactly enumerable autoregressive policy pi(y|x). Two parameterizations:
//
//  - Tabular: one logit per (prompt, candidate response); the distribution over
//    a prompt's row is the softmax of that row.
//  - Parametric: a bias-free linear map from a one-hot context encoding
//    (prompt id, position, previous token) to next-token logits, applied
//    autoregressively. Position max_len deterministically emits the
//    terminator and contributes zero log-probability.
//
// Policies are value types; apply_gradient returns an updated copy. A frozen
// policy rejects apply_gradient and is the only form accepted as a reference
// model by the reward utilities.
class Policy {
 public:
  enum class Kind { Tabular, Parametric };

  // --- construction -------------------------------------------------------
  static Policy tabular(std::vector<uint32_t> prompt_ids,
                        std::shared_ptr<const ResponseSet> responses,
                        std::vector<double> logits, bool frozen = false);
  static Policy uniform_tabular(std::vector<uint32_t> prompt_ids,
                                std::shared_ptr<const ResponseSet> responses);
  static Policy random_tabular(std::vector<uint32_t> prompt_ids,
                               std::shared_ptr<const ResponseSet> responses,
                               uint64_t seed, double scale);

  static Policy parametric(const Vocab& v, uint32_t num_prompts,
                           std::vector<double> weights, bool frozen = false);
  static Policy zero_parametric(const Vocab& v, uint32_t num_prompts);
  static Policy random_parametric(const Vocab& v, uint32_t num_prompts,
                                  uint64_t seed, double scale);

  static size_t parametric_param_count(const Vocab& v, uint32_t num_prompts);

  // --- shape --------------------------------------------------------------
  Kind kind() const { return kind_; }
  const Vocab& vocab() const { return vocab_; }
  bool frozen() const { return frozen_; }
  size_t param_count() const { return params_.size(); }
  const std::vector<double>& params() const { return params_; }

  // Tabular only; empty / null for parametric policies.
  const std::vector<uint32_t>& prompt_ids() const { return prompt_ids_; }
  const std::shared_ptr<const ResponseSet>& response_set() const { return responses_; }
  // Parametric only; for tabular policies this is prompt_ids().size().
  uint32_t num_prompts() const;

  bool defined_on(const Prompt& x) const;

  Policy frozen_clone() const;

  // --- operations ---------------------------------------------------------
  // log pi(y|x). Throws UnknownPrompt / MalformedResponse. For a tabular
  // policy, y must be a member of the candidate set.
  double log_prob(const Prompt& x, const Response& y) const;

  // Draws one response. Identical (policy, x, rng_seed) triples produce
  // identical responses on every platform.
  Response sample(const Prompt& x, uint64_t rng_seed) const;

  // grad += coeff * d log pi(y|x) / d params. grad.size() must equal
  // param_count(). The workhorse behind every analytic loss gradient.
  void accumulate_log_prob_grad(const Prompt& x, const Response& y, double coeff,
                                std::span<double> grad) const;

  // One descent step: params - step_size * grad. step_size may be zero
  // (a null step); negative is an error.
  Policy apply_gradient(std::span<const double> grad, double step_size) const;

 private:
  Policy() = default;
  void rebuild_tabular_cache();
  size_t tabular_row(const Prompt& x) const;
  void parametric_conditional(uint32_t prompt_id, uint32_t position, uint32_t prev_slot,
                              std::span<double> log_probs) const;

  Kind kind_ = Kind::Tabular;
  Vocab vocab_;
  bool frozen_ = false;
  std::vector<double> params_;

  // tabular
  std::vector<uint32_t> prompt_ids_;
  std::map<uint32_t, size_t> prompt_row_;
  std::shared_ptr<const ResponseSet> responses_;
  std::vector<double> row_log_norm_;

  // parametric
  uint32_t num_prompts_ = 0;
};

// Exact KL(p || q) for prompt x, by enumeration over the candidate set of p
// (tabular) or the full response space (both parametric). Both policies must
// share a vocab and cover the same candidates.
double kl_divergence(const Policy& p, const Policy& q, const Prompt& x);

// pi(y|x) for every y in the set, in set order. For a tabular policy the set
// must match its own candidate set; for a parametric policy any set over the
// same vocab works.
std::vector<double> response_probabilities(const Policy& pi, const Prompt& x,
                                           const ResponseSet& set);

// Binary checkpoint with a JSON sidecar at path + ".json". The sidecar is the
// authoritative load source (it carries prompt ids and candidate lists); the
// binary stream holds magic, version, kind, vocab, and raw parameters.
void save_checkpoint(const Policy& p, const std::string& path);
Policy load_checkpoint(const std::string& path);

}  // namespace una
