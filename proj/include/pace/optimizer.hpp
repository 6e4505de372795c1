#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pace/error.hpp"

namespace pace {

/// Full-batch gradient descent settings.
struct GdConfig {
  double learning_rate = 1.0;
  std::size_t iterations = 1;
  double momentum = 0.9;
  bool nesterov = true;
};

inline void validate(const GdConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ParameterError("gd: learning rate must be finite and > 0");
  }
  if (cfg.iterations < 1) throw ParameterError("gd: iterations must be >= 1");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ParameterError("gd: momentum must lie in [0, 1)");
  }
}

/// losses[k] is the objective at the point where step k took its gradient
/// (the look-ahead point under Nesterov). final_loss is at the returned point.
struct GdTrace {
  std::vector<double> losses;
  double final_loss = 0.0;
};

/// Momentum descent from `params` with the velocity starting at zero:
///   v <- mu*v - eta*grad(W + mu*v);  W <- W + v
/// `objective(point, grad)` returns the loss at `point` and writes its gradient
/// into `grad` (same shape as `point`).
template <typename Params, typename Objective>
Params momentum_descent(Params params, Objective&& objective, const GdConfig& cfg,
                        GdTrace* trace = nullptr) {
  validate(cfg);
  Params velocity = Params::Zero(params.rows(), params.cols());
  Params grad = Params::Zero(params.rows(), params.cols());
  Params point;
  if (trace) {
    trace->losses.clear();
    trace->losses.reserve(cfg.iterations);
  }
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    double loss = 0.0;
    if (cfg.nesterov) {
      point = params + cfg.momentum * velocity;
      loss = objective(point, grad);
    } else {
      loss = objective(params, grad);
    }
    if (!std::isfinite(loss) || !grad.allFinite()) throw DivergenceError(k);
    if (trace) trace->losses.push_back(loss);
    velocity = cfg.momentum * velocity - cfg.learning_rate * grad;
    params += velocity;
  }
  const double final_loss = objective(params, grad);
  if (!std::isfinite(final_loss)) throw DivergenceError(cfg.iterations);
  if (trace) trace->final_loss = final_loss;
  return params;
}

}  // namespace pace
