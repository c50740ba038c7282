#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "resdyn/core/param_store.hpp"

namespace resdyn::core {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_offset = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Compare reverse-mode gradients against central finite differences.
/// loss_and_grad must compute the scalar objective and accumulate its
/// gradients into the store; loss_only must compute the same objective
/// without touching gradients. indices selects flat parameter coordinates
/// (empty means every coordinate). Relative error uses a floor in the
/// denominator so near-zero gradients are compared absolutely.
inline GradCheckReport grad_check(ParamStore& store,
                                  const std::function<double(ParamStore&)>& loss_and_grad,
                                  const std::function<double(ParamStore&)>& loss_only,
                                  double h = 1e-5, double denom_floor = 1e-3,
                                  std::vector<std::size_t> indices = {}) {
  store.zero_grads();
  loss_and_grad(store);
  const std::vector<double> analytic = store.gather_grads();
  store.zero_grads();

  if (indices.empty()) {
    indices.resize(store.scalar_count());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  }

  GradCheckReport report;
  for (std::size_t k : indices) {
    const auto [name, off] = store.locate(k);
    double& w = store.at(name).value.data()[off];
    const double saved = w;
    w = saved + h;
    const double f_plus = loss_only(store);
    w = saved - h;
    const double f_minus = loss_only(store);
    w = saved;
    const double numeric = (f_plus - f_minus) / (2.0 * h);
    const double a = analytic[k];
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), denom_floor});
    ++report.checked;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = name;
      report.worst_offset = off;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace resdyn::core
