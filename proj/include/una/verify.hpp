#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "una/oracle.hpp"

namespace una::verify {

// One verified property: what was measured, the bound it was held to, and
// whether it passed. `detail` carries context (replay file, expected value).
struct CheckResult {
  std::string name;
  bool pass = false;
  double observed = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct SuiteReport {
  std::vector<CheckResult> checks;
  bool all_pass() const;
};

enum class Suite { Proofs, Gradients, Equivalence, Oracle, All };

Suite parse_suite(const std::string& name);
std::string suite_name(Suite suite);

// Runs the named property suite. Randomized sweeps derive their cases from
// `seed` and may shard across `threads` workers; results are merged in case
// order, so the report is identical for any thread count. Failing randomized
// cases serialize a replay instance into replay_dir.
SuiteReport run_suite(Suite suite, uint64_t seed, unsigned threads,
                      const std::string& replay_dir = ".");

void print_report(const SuiteReport& report, std::ostream& out);

// Seeded problem generator shared by the suites and the tests: `num_responses`
// single-token candidates (vocab size num_responses, max_len 1), uniform-ish
// reference logits in [-0.5, 0.5], rewards uniform in [0, reward_amp].
oracle::TabularInstance random_instance(uint64_t seed, uint32_t num_prompts,
                                        uint32_t num_responses, double beta, double reward_amp);

// One prompt, two candidate responses with the given rewards.
oracle::TabularInstance two_response_instance(double r0, double r1, double beta);

}  // namespace una::verify
