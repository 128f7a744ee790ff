#pragma once

#include <string>
#include <vector>

// Built against the double-precision library; only std types cross over.
struct GradientGroup {
  std::string name;
  double rel_err = 0;
};

std::vector<GradientGroup> toy_gradient_errors(double eps, unsigned long long seed);
