#include "una/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "una/rng.hpp"
#include "vendor/json.hpp"

namespace una {

namespace {

constexpr uint64_t kMaxEnumeration = uint64_t{1} << 22;

bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// max-shifted log(sum(exp(z))) over a non-empty span
double log_sum_exp(std::span<const double> z) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

size_t pick_from_cdf(std::span<const double> probs, double u) {
  double cum = 0.0;
  for (size_t i = 0; i + 1 < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return probs.size() - 1;
}

}  // namespace

void Vocab::validate() const {
  if (size < 2) throw ValidationError("vocab size must be at least 2 (terminator plus one content token)");
  if (max_len < 1) throw ValidationError("vocab max_len must be at least 1");
}

uint64_t response_space_size(const Vocab& v) {
  v.validate();
  uint64_t total = 0;
  uint64_t pow = 1;
  for (uint32_t k = 0; k <= v.max_len; ++k) {
    total += pow;
    pow *= v.size - 1;
  }
  return total;
}

void validate_response(const Vocab& v, const Response& y) {
  v.validate();
  if (y.tokens.empty()) throw MalformedResponse("response has no tokens");
  if (y.tokens.back() != kEndOfSequence) throw MalformedResponse("response does not end with the terminator");
  if (y.tokens.size() - 1 > v.max_len) throw MalformedResponse("response exceeds max_len content tokens");
  for (size_t i = 0; i + 1 < y.tokens.size(); ++i) {
    if (y.tokens[i] == kEndOfSequence) throw MalformedResponse("terminator appears before the final position");
    if (y.tokens[i] >= v.size) throw MalformedResponse("token id outside the vocab");
  }
}

bool canonical_response_less(const Response& a, const Response& b) {
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

ResponseSet::ResponseSet(const Vocab& v, std::vector<Response> responses) : vocab_(v) {
  v.validate();
  if (responses.empty()) throw ValidationError("response set must not be empty");
  for (const Response& y : responses) validate_response(v, y);
  std::sort(responses.begin(), responses.end(), canonical_response_less);
  responses_ = std::move(responses);
  for (size_t i = 0; i < responses_.size(); ++i) {
    auto [it, inserted] = index_.emplace(responses_[i].tokens, i);
    if (!inserted) throw ValidationError("response set contains duplicates");
  }
  full_ = responses_.size() == response_space_size(v);
}

std::shared_ptr<const ResponseSet> ResponseSet::enumerate_all(const Vocab& v) {
  uint64_t total = response_space_size(v);
  if (total > kMaxEnumeration) throw ValidationError("response space too large to enumerate");
  std::vector<Response> out;
  out.reserve(total);
  std::vector<std::vector<uint32_t>> frontier = {{}};
  for (uint32_t len = 0; len <= v.max_len; ++len) {
    for (const auto& content : frontier) {
      Response y;
      y.tokens = content;
      y.tokens.push_back(kEndOfSequence);
      out.push_back(std::move(y));
    }
    if (len == v.max_len) break;
    std::vector<std::vector<uint32_t>> next;
    next.reserve(frontier.size() * (v.size - 1));
    for (const auto& content : frontier) {
      for (uint32_t t = 1; t < v.size; ++t) {
        auto extended = content;
        extended.push_back(t);
        next.push_back(std::move(extended));
      }
    }
    frontier = std::move(next);
  }
  return std::make_shared<const ResponseSet>(v, std::move(out));
}

std::optional<size_t> ResponseSet::index_of(const Response& y) const {
  auto it = index_.find(y.tokens);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool ResponseSet::same_responses(const ResponseSet& other) const {
  if (this == &other) return true;
  if (vocab_ != other.vocab_) return false;
  if (responses_.size() != other.responses_.size()) return false;
  for (size_t i = 0; i < responses_.size(); ++i) {
    if (!(responses_[i] == other.responses_[i])) return false;
  }
  return true;
}

// --- Policy construction ----------------------------------------------------

Policy Policy::tabular(std::vector<uint32_t> prompt_ids,
                       std::shared_ptr<const ResponseSet> responses,
                       std::vector<double> logits, bool frozen) {
  if (!responses) throw ValidationError("tabular policy needs a response set");
  if (prompt_ids.empty()) throw ValidationError("tabular policy needs at least one prompt");
  const size_t rows = prompt_ids.size();
  const size_t cols = responses->size();
  if (logits.size() != rows * cols) throw DimensionMismatch("logit table has the wrong shape");
  if (!all_finite(logits)) throw ValidationError("logits must be finite");

  Policy p;
  p.kind_ = Kind::Tabular;
  p.vocab_ = responses->vocab();
  p.frozen_ = frozen;
  p.params_ = std::move(logits);
  p.prompt_ids_ = std::move(prompt_ids);
  for (size_t i = 0; i < p.prompt_ids_.size(); ++i) {
    auto [it, inserted] = p.prompt_row_.emplace(p.prompt_ids_[i], i);
    if (!inserted) throw ValidationError("duplicate prompt id in tabular policy");
  }
  p.responses_ = std::move(responses);
  p.rebuild_tabular_cache();
  return p;
}

Policy Policy::uniform_tabular(std::vector<uint32_t> prompt_ids,
                               std::shared_ptr<const ResponseSet> responses) {
  if (!responses) throw ValidationError("tabular policy needs a response set");
  std::vector<double> logits(prompt_ids.size() * responses->size(), 0.0);
  return tabular(std::move(prompt_ids), std::move(responses), std::move(logits));
}

Policy Policy::random_tabular(std::vector<uint32_t> prompt_ids,
                              std::shared_ptr<const ResponseSet> responses,
                              uint64_t seed, double scale) {
  if (!responses) throw ValidationError("tabular policy needs a response set");
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ValidationError("scale must be a finite non-negative number");
  std::vector<double> logits(prompt_ids.size() * responses->size());
  for (size_t i = 0; i < logits.size(); ++i) {
    logits[i] = (2.0 * rng::uniform(seed, rng::kStreamInit, i) - 1.0) * scale;
  }
  return tabular(std::move(prompt_ids), std::move(responses), std::move(logits));
}

size_t Policy::parametric_param_count(const Vocab& v, uint32_t num_prompts) {
  v.validate();
  if (num_prompts == 0) throw ValidationError("parametric policy needs at least one prompt");
  const size_t d = size_t{num_prompts} + v.max_len + v.size + 1;
  return size_t{v.size} * d;
}

Policy Policy::parametric(const Vocab& v, uint32_t num_prompts,
                          std::vector<double> weights, bool frozen) {
  const size_t expect = parametric_param_count(v, num_prompts);
  if (weights.size() != expect) throw DimensionMismatch("weight matrix has the wrong shape");
  if (!all_finite(weights)) throw ValidationError("weights must be finite");
  Policy p;
  p.kind_ = Kind::Parametric;
  p.vocab_ = v;
  p.frozen_ = frozen;
  p.params_ = std::move(weights);
  p.num_prompts_ = num_prompts;
  return p;
}

Policy Policy::zero_parametric(const Vocab& v, uint32_t num_prompts) {
  return parametric(v, num_prompts, std::vector<double>(parametric_param_count(v, num_prompts), 0.0));
}

Policy Policy::random_parametric(const Vocab& v, uint32_t num_prompts,
                                 uint64_t seed, double scale) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ValidationError("scale must be a finite non-negative number");
  std::vector<double> w(parametric_param_count(v, num_prompts));
  for (size_t i = 0; i < w.size(); ++i) {
    w[i] = (2.0 * rng::uniform(seed, rng::kStreamInit, i) - 1.0) * scale;
  }
  return parametric(v, num_prompts, std::move(w));
}

uint32_t Policy::num_prompts() const {
  return kind_ == Kind::Tabular ? static_cast<uint32_t>(prompt_ids_.size()) : num_prompts_;
}

bool Policy::defined_on(const Prompt& x) const {
  if (kind_ == Kind::Tabular) return prompt_row_.count(x.id) != 0;
  return x.id < num_prompts_;
}

Policy Policy::frozen_clone() const {
  Policy p = *this;
  p.frozen_ = true;
  return p;
}

void Policy::rebuild_tabular_cache() {
  const size_t rows = prompt_ids_.size();
  const size_t cols = responses_->size();
  row_log_norm_.resize(rows);
  for (size_t r = 0; r < rows; ++r) {
    row_log_norm_[r] = log_sum_exp(std::span<const double>(params_).subspan(r * cols, cols));
  }
}

size_t Policy::tabular_row(const Prompt& x) const {
  auto it = prompt_row_.find(x.id);
  if (it == prompt_row_.end()) throw UnknownPrompt("prompt id " + std::to_string(x.id) + " not covered by this policy");
  return it->second;
}

// --- log_prob ---------------------------------------------------------------

double Policy::log_prob(const Prompt& x, const Response& y) const {
  validate_response(vocab_, y);
  if (kind_ == Kind::Tabular) {
    const size_t row = tabular_row(x);
    auto idx = responses_->index_of(y);
    if (!idx) throw MalformedResponse("response is not in the candidate set");
    return params_[row * responses_->size() + *idx] - row_log_norm_[row];
  }
  if (x.id >= num_prompts_) throw UnknownPrompt("prompt id " + std::to_string(x.id) + " not covered by this policy");
  std::vector<double> lp(vocab_.size);
  double total = 0.0;
  uint32_t prev_slot = 0;  // slot 0 marks the start of the response
  for (uint32_t pos = 0; pos < y.tokens.size(); ++pos) {
    const uint32_t tok = y.tokens[pos];
    if (pos == vocab_.max_len) break;  // forced terminator, log-probability zero
    parametric_conditional(x.id, pos, prev_slot, lp);
    total += lp[tok];
    prev_slot = tok + 1;
  }
  return total;
}

void Policy::parametric_conditional(uint32_t prompt_id, uint32_t position, uint32_t prev_slot,
                                    std::span<double> log_probs) const {
  const size_t d = size_t{num_prompts_} + vocab_.max_len + vocab_.size + 1;
  const size_t pos_col = size_t{num_prompts_} + position;
  const size_t prev_col = size_t{num_prompts_} + vocab_.max_len + prev_slot;
  for (uint32_t k = 0; k < vocab_.size; ++k) {
    const double* row = params_.data() + size_t{k} * d;
    log_probs[k] = row[prompt_id] + row[pos_col] + row[prev_col];
  }
  const double lse = log_sum_exp(log_probs.first(vocab_.size));
  for (uint32_t k = 0; k < vocab_.size; ++k) log_probs[k] -= lse;
}

// --- sampling ---------------------------------------------------------------

Response Policy::sample(const Prompt& x, uint64_t rng_seed) const {
  if (kind_ == Kind::Tabular) {
    const size_t row = tabular_row(x);
    const size_t cols = responses_->size();
    std::vector<double> probs(cols);
    for (size_t i = 0; i < cols; ++i) {
      probs[i] = std::exp(params_[row * cols + i] - row_log_norm_[row]);
    }
    const double u = rng::uniform(rng_seed, rng::kStreamSample, 0);
    return responses_->at(pick_from_cdf(probs, u));
  }
  if (x.id >= num_prompts_) throw UnknownPrompt("prompt id " + std::to_string(x.id) + " not covered by this policy");
  Response y;
  std::vector<double> lp(vocab_.size);
  uint32_t prev_slot = 0;
  for (uint32_t pos = 0;; ++pos) {
    if (pos == vocab_.max_len) {
      y.tokens.push_back(kEndOfSequence);
      return y;
    }
    parametric_conditional(x.id, pos, prev_slot, lp);
    std::vector<double> probs(vocab_.size);
    for (uint32_t k = 0; k < vocab_.size; ++k) probs[k] = std::exp(lp[k]);
    const double u = rng::uniform(rng_seed, rng::kStreamSample, pos);
    const uint32_t tok = static_cast<uint32_t>(pick_from_cdf(probs, u));
    y.tokens.push_back(tok);
    if (tok == kEndOfSequence) return y;
    prev_slot = tok + 1;
  }
}

// --- gradients --------------------------------------------------------------

void Policy::accumulate_log_prob_grad(const Prompt& x, const Response& y, double coeff,
                                      std::span<double> grad) const {
  if (grad.size() != params_.size()) throw DimensionMismatch("gradient buffer has the wrong size");
  validate_response(vocab_, y);
  if (kind_ == Kind::Tabular) {
    const size_t row = tabular_row(x);
    const size_t cols = responses_->size();
    auto idx = responses_->index_of(y);
    if (!idx) throw MalformedResponse("response is not in the candidate set");
    for (size_t k = 0; k < cols; ++k) {
      const double pk = std::exp(params_[row * cols + k] - row_log_norm_[row]);
      grad[row * cols + k] += coeff * ((k == *idx ? 1.0 : 0.0) - pk);
    }
    return;
  }
  if (x.id >= num_prompts_) throw UnknownPrompt("prompt id " + std::to_string(x.id) + " not covered by this policy");
  const size_t d = size_t{num_prompts_} + vocab_.max_len + vocab_.size + 1;
  std::vector<double> lp(vocab_.size);
  uint32_t prev_slot = 0;
  for (uint32_t pos = 0; pos < y.tokens.size(); ++pos) {
    const uint32_t tok = y.tokens[pos];
    if (pos == vocab_.max_len) break;  // forced position carries no gradient
    parametric_conditional(x.id, pos, prev_slot, lp);
    const size_t pos_col = size_t{num_prompts_} + pos;
    const size_t prev_col = size_t{num_prompts_} + vocab_.max_len + prev_slot;
    for (uint32_t k = 0; k < vocab_.size; ++k) {
      const double g = coeff * ((k == tok ? 1.0 : 0.0) - std::exp(lp[k]));
      grad[size_t{k} * d + x.id] += g;
      grad[size_t{k} * d + pos_col] += g;
      grad[size_t{k} * d + prev_col] += g;
    }
    prev_slot = tok + 1;
  }
}

Policy Policy::apply_gradient(std::span<const double> grad, double step_size) const {
  if (frozen_) throw FrozenPolicy("cannot update a frozen policy");
  if (grad.size() != params_.size()) throw DimensionMismatch("gradient has the wrong size");
  if (!std::isfinite(step_size) || step_size < 0.0) throw ValidationError("step_size must be finite and non-negative");
  if (!all_finite(grad)) throw NonFiniteGradient("gradient contains a non-finite entry");

  Policy p = *this;
  for (size_t i = 0; i < p.params_.size(); ++i) {
    p.params_[i] -= step_size * grad[i];
  }
  if (p.kind_ == Kind::Tabular) p.rebuild_tabular_cache();
  return p;
}

// --- derived quantities ------------------------------------------------------

std::vector<double> response_probabilities(const Policy& pi, const Prompt& x,
                                           const ResponseSet& set) {
  if (!(pi.vocab() == set.vocab())) throw VocabMismatch("policy and response set use different vocabs");
  if (pi.kind() == Policy::Kind::Tabular && !pi.response_set()->same_responses(set)) {
    throw VocabMismatch("tabular policy is defined over a different candidate set");
  }
  std::vector<double> probs(set.size());
  for (size_t i = 0; i < set.size(); ++i) {
    probs[i] = std::exp(pi.log_prob(x, set.at(i)));
  }
  return probs;
}

double kl_divergence(const Policy& p, const Policy& q, const Prompt& x) {
  if (!(p.vocab() == q.vocab())) throw VocabMismatch("policies use different vocabs");
  if (!p.defined_on(x) || !q.defined_on(x)) {
    throw UnknownPrompt("prompt id " + std::to_string(x.id) + " not covered by both policies");
  }
  std::shared_ptr<const ResponseSet> owned;
  const ResponseSet* set = nullptr;
  if (p.kind() == Policy::Kind::Tabular) {
    set = p.response_set().get();
    if (q.kind() == Policy::Kind::Tabular && !q.response_set()->same_responses(*set)) {
      throw VocabMismatch("policies are defined over different candidate sets");
    }
  } else if (q.kind() == Policy::Kind::Tabular) {
    // p has full support, so q must cover the whole space
    if (!q.response_set()->full_enumeration()) {
      throw VocabMismatch("reference candidate set does not cover the response space");
    }
    set = q.response_set().get();
  } else {
    owned = ResponseSet::enumerate_all(p.vocab());
    set = owned.get();
  }
  double kl = 0.0;
  for (size_t i = 0; i < set->size(); ++i) {
    const double lp = p.log_prob(x, set->at(i));
    const double lq = q.log_prob(x, set->at(i));
    kl += std::exp(lp) * (lp - lq);
  }
  return kl;
}

// --- checkpoints -------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

constexpr char kMagic[4] = {'U', 'N', 'A', 'P'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("checkpoint file is truncated");
  return v;
}

}  // namespace

void save_checkpoint(const Policy& p, const std::string& path) {
  std::ofstream bin(path, std::ios::binary | std::ios::trunc);
  if (!bin) throw CheckpointError("cannot open checkpoint file for writing: " + path);
  bin.write(kMagic, 4);
  write_raw(bin, kVersion);
  write_raw(bin, static_cast<uint8_t>(p.kind() == Policy::Kind::Tabular ? 0 : 1));
  write_raw(bin, p.vocab().size);
  write_raw(bin, p.vocab().max_len);
  write_raw(bin, static_cast<uint64_t>(p.param_count()));
  bin.write(reinterpret_cast<const char*>(p.params().data()),
            static_cast<std::streamsize>(p.param_count() * sizeof(double)));
  if (!bin) throw CheckpointError("failed while writing checkpoint: " + path);
  bin.close();

  nlohmann::json j;
  j["format"] = "una-policy";
  j["version"] = kVersion;
  j["kind"] = p.kind() == Policy::Kind::Tabular ? "tabular" : "parametric";
  j["vocab"] = {{"size", p.vocab().size}, {"max_len", p.vocab().max_len}};
  j["frozen"] = p.frozen();
  j["params"] = p.params();
  if (p.kind() == Policy::Kind::Tabular) {
    j["prompt_ids"] = p.prompt_ids();
    auto& set = *p.response_set();
    nlohmann::json resp = nlohmann::json::array();
    for (size_t i = 0; i < set.size(); ++i) resp.push_back(set.at(i).tokens);
    j["responses"] = std::move(resp);
  } else {
    j["num_prompts"] = p.num_prompts();
  }
  std::ofstream side(path + ".json", std::ios::trunc);
  if (!side) throw CheckpointError("cannot open checkpoint sidecar for writing: " + path + ".json");
  side << j.dump(2) << "\n";
  if (!side) throw CheckpointError("failed while writing checkpoint sidecar: " + path + ".json");
}

namespace {

Policy load_checkpoint_sidecar(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw CheckpointError("cannot open checkpoint sidecar: " + json_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint sidecar is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (j.at("format").get<std::string>() != "una-policy") throw CheckpointError("unrecognized checkpoint format");
    if (j.at("version").get<uint32_t>() != kVersion) throw CheckpointError("unsupported checkpoint version");
    Vocab v{j.at("vocab").at("size").get<uint32_t>(), j.at("vocab").at("max_len").get<uint32_t>()};
    const std::string kind = j.at("kind").get<std::string>();
    auto params = j.at("params").get<std::vector<double>>();
    const bool frozen = j.value("frozen", false);
    if (kind == "tabular") {
      auto ids = j.at("prompt_ids").get<std::vector<uint32_t>>();
      std::vector<Response> responses;
      for (const auto& toks : j.at("responses")) {
        responses.push_back(Response{toks.get<std::vector<uint32_t>>()});
      }
      auto set = std::make_shared<const ResponseSet>(v, std::move(responses));
      return Policy::tabular(std::move(ids), std::move(set), std::move(params), frozen);
    }
    if (kind == "parametric") {
      return Policy::parametric(v, j.at("num_prompts").get<uint32_t>(), std::move(params), frozen);
    }
    throw CheckpointError("unrecognized policy kind in checkpoint: " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint sidecar is missing fields: " + std::string(e.what()));
  }
}

Policy load_checkpoint_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("bad checkpoint magic");
  if (read_raw<uint32_t>(in) != kVersion) throw CheckpointError("unsupported checkpoint version");
  const uint8_t kind = read_raw<uint8_t>(in);
  Vocab v{read_raw<uint32_t>(in), read_raw<uint32_t>(in)};
  const uint64_t count = read_raw<uint64_t>(in);
  std::vector<double> params(count);
  in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw CheckpointError("checkpoint file is truncated");
  if (kind == 0) {
    // Without the sidecar the candidate list is unknown; a full enumeration
    // with densely numbered prompts is the only reconstructible layout.
    const uint64_t cols = response_space_size(v);
    if (cols == 0 || count % cols != 0) throw CheckpointError("tabular checkpoint is not a full enumeration");
    const uint64_t rows = count / cols;
    std::vector<uint32_t> ids(rows);
    for (uint64_t i = 0; i < rows; ++i) ids[i] = static_cast<uint32_t>(i);
    return Policy::tabular(std::move(ids), ResponseSet::enumerate_all(v), std::move(params));
  }
  if (kind == 1) {
    const uint64_t d = count / v.size;
    if (count % v.size != 0 || d < uint64_t{v.max_len} + v.size + 2) {
      throw CheckpointError("parametric checkpoint has inconsistent dimensions");
    }
    const uint32_t num_prompts = static_cast<uint32_t>(d - v.max_len - v.size - 1);
    return Policy::parametric(v, num_prompts, std::move(params));
  }
  throw CheckpointError("unrecognized policy kind in checkpoint");
}

}  // namespace

Policy load_checkpoint(const std::string& path) {
  const std::string sidecar = path + ".json";
  if (std::filesystem::exists(sidecar)) return load_checkpoint_sidecar(sidecar);
  return load_checkpoint_binary(path);
}

}  // namespace una
