#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace implicit_sparse::dynamics {

struct PropertyResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first_failure;  // empty when every case passed

  bool passed() const noexcept { return cases > 0 && failures == 0; }
};

struct LemmaSuiteOptions {
  std::size_t cases = 200;
  std::uint64_t seed = 20190601;
};

/// Names of every property in the suite, in execution order.
std::vector<std::string> lemma_property_names();

/// Randomized checks of the scalar-sequence properties. Each case draws x* log-uniform in
/// [1e-3, 1e3], alpha log-uniform in [1e-8, 1e-1] and eta as a uniform fraction in
/// [0.1, 1] of the largest admissible step. Comparisons are exact (no tolerance).
std::vector<PropertyResult> run_lemma_suite(const LemmaSuiteOptions& options);

/// Runs only the named property. Throws ParameterError for unknown names.
PropertyResult run_lemma_property(const std::string& name, const LemmaSuiteOptions& options);

/// Per-iteration error terms b_t of one support coordinate during a short noisy run of
/// Algorithm 1; used as the "replay" error stream.
std::vector<double> descent_error_trace();

}  // namespace implicit_sparse::dynamics
