#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace entrosim::testing {

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps entries
/// whose true gradient is ~0 from dividing round-off by round-off.
inline constexpr double kRelFloor = 1e-3;
inline constexpr double kFdStep = 1e-5;

struct GradCheck {
  std::string name;
  double max_rel = 0.0;
  std::size_t worst = 0;
  std::size_t checked = 0;
  double tolerance = 1e-6;

  bool ok() const { return checked > 0 && max_rel < tolerance; }
};

inline double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelFloor});
  return std::abs(analytic - numeric) / denom;
}

/// Central differences of `loss` with respect to every entry of `x`,
/// compared against `analytic`. `x` is perturbed in place and restored.
inline GradCheck check_gradient(std::string name, std::span<double> x, std::span<const double> analytic,
                                const std::function<double()>& loss, double tolerance = 1e-6) {
  GradCheck r;
  r.name = std::move(name);
  r.tolerance = tolerance;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + kFdStep;
    const double up = loss();
    x[i] = saved - kFdStep;
    const double down = loss();
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * kFdStep);
    const double e = rel_error(analytic[i], numeric);
    if (e > r.max_rel) {
      r.max_rel = e;
      r.worst = i;
    }
    ++r.checked;
  }
  return r;
}

/// Every layer, loss and the end-to-end Siamese objective in double precision.
std::vector<GradCheck> gradient_suite(unsigned seed = 1);

}  // namespace entrosim::testing
