#pragma once

#include <string>
#include <vector>

namespace gradpce {

struct SelfCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quadrature, finite-difference and analytic oracle checks over every
/// module; a few seconds in total.
std::vector<SelfCheck> run_selftest();

}  // namespace gradpce
