/*
 * Copyright 2026 The wfem-gp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef WFEM_ADAM_HPP_
#define WFEM_ADAM_HPP_

#include <Eigen/Dense>
#include <cmath>

#include "wfem/errors.hpp"

namespace wfem {

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment state; owned and mutated by exactly one optimizer loop.
struct AdamState {
  AdamConfig config;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  static AdamState make(int dim, AdamConfig cfg = {}) {
    AdamState s;
    s.config = cfg;
    s.m = Eigen::VectorXd::Zero(dim);
    s.v = Eigen::VectorXd::Zero(dim);
    return s;
  }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(AdamState& state, Eigen::VectorXd& params,
                      const Eigen::VectorXd& grad) {
  if (params.size() != grad.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: parameter/gradient/state lengths disagree");
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double m_corr = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double v_corr = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  params.array() -= c.step_size * (state.m.array() / m_corr) /
                    ((state.v.array() / v_corr).sqrt() + c.epsilon);
}

}  // namespace wfem

#endif  // WFEM_ADAM_HPP_
