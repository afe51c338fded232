#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cogsig/models.hpp"
#include "cogsig/rng.hpp"

namespace testsupport {

struct GradCheck {
  double worst = 0.0;
  std::string worst_group;
  std::size_t checked = 0;
};

// Central differences on every parameter against forward_backward.
inline GradCheck gradient_check(cogsig::TrunkNet net, const cogsig::TokenBatch& batch, std::size_t head,
                                double eps = 1e-5, double floor = 1e-6) {
  cogsig::TrunkGradients grads;
  net.forward_backward(batch, head, &grads);
  GradCheck out;
  for (std::size_t g = 0; g < net.group_count(); ++g) {
    const auto analytic = grads.dense(net, g);
    auto& params = net.group(g);
    for (std::size_t p = 0; p < params.size(); ++p) {
      const double saved = params[p];
      params[p] = saved + eps;
      const double up = net.forward_backward(batch, head, nullptr);
      params[p] = saved - eps;
      const double down = net.forward_backward(batch, head, nullptr);
      params[p] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > out.worst) {
        out.worst = rel;
        out.worst_group = net.group_name(g);
      }
      ++out.checked;
    }
  }
  return out;
}

// Fills every parameter group with N(0, sd) draws so no gradient is zero by
// construction.
inline void randomize(cogsig::TrunkNet& net, std::uint64_t seed, double sd = 0.5) {
  cogsig::Rng rng(seed);
  for (std::size_t g = 0; g < net.group_count(); ++g)
    for (auto& v : net.group(g)) v = rng.normal(0.0, sd);
}

}  // namespace testsupport
