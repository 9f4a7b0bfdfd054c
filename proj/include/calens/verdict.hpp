#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace calens {

// One named check inside a verification run, with the numbers behind it.
struct Check {
  std::string name;
  bool passed = true;
  std::string detail;
  std::optional<std::size_t> first_violation;  // row or cell index
  std::vector<std::pair<std::string, double>> evidence;
};

struct VerdictReport {
  std::string subject;
  std::vector<Check> checks;
  std::vector<std::string> notes;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  const Check* first_failure() const {
    for (const auto& c : checks)
      if (!c.passed) return &c;
    return nullptr;
  }

  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

}  // namespace calens
