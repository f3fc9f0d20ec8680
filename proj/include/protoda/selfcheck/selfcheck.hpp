#ifndef PROTODA_SELFCHECK_SELFCHECK_HPP
#define PROTODA_SELFCHECK_SELFCHECK_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace protoda {

struct SelfcheckOptions {
  /// Random instances per gradient check.
  std::size_t seeds = 20;
  /// Random instances per oracle comparison.
  std::size_t instances = 1000;
  std::uint64_t seed = 7;
  /// Test hook: gradients of the named check are perturbed before comparison.
  std::string corrupt;
};

struct SelfcheckItem {
  std::string group;  // "gradient" | "oracle" | "property"
  std::string name;
  bool passed = false;
  double error = 0.0;  // worst measured error
  double tolerance = 0.0;
  std::string detail;
};

struct SelfcheckReport {
  std::vector<SelfcheckItem> items;

  bool passed() const;
  std::vector<std::string> failures() const;
  /// One line per check: PASS|FAIL, group, name, error and tolerance.
  std::string text() const;
};

/// Names of every check, in execution order.
std::vector<std::string> selfcheck_names();

SelfcheckReport run_selfcheck(const SelfcheckOptions& options = {});

}  // namespace protoda

#endif  // PROTODA_SELFCHECK_SELFCHECK_HPP
