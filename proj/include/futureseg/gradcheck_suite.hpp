#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace futureseg {

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t elements = 0;  // number of gradient entries compared

  bool passed() const { return max_rel_error < tolerance; }
};

inline constexpr double kOpGradTolerance = 1e-4;
inline constexpr double kModelGradTolerance = 1e-3;
inline constexpr double kFiniteDiffEps = 1e-5;

// Compares reverse-mode gradients with central differences in double
// precision for every differentiable op, the ConvLSTM cell and runners, and
// the tiny end-to-end model (K=3, 16x16, widths 4) in all three modes.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, bool include_models = true);

}  // namespace futureseg
