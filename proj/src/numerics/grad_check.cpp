#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spikeforge/numerics/ops.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {

double grad_check_inplace(const std::function<double()>& f, Tensor& param, const Tensor& analytic, double eps) {
  require_shape(analytic, param.shape(), "grad_check analytic gradient");
  if (!(eps > 0)) throw std::invalid_argument("grad_check: eps must be positive");
  if (!std::isfinite(f())) throw std::domain_error("grad_check: f(x) is not finite");
  double worst = 0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const real saved = param[i];
    param[i] = static_cast<real>(saved + eps);
    const double plus = f();
    param[i] = static_cast<real>(saved - eps);
    const double minus = f();
    param[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) throw std::domain_error("grad_check: f not finite near x");
    const double numeric = (plus - minus) / (2 * eps);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x, const Tensor& analytic,
                  double eps) {
  Tensor probe = x;
  return grad_check_inplace([&] { return f(probe); }, probe, analytic, eps);
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI
