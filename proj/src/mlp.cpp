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

#include "wfem/mlp.hpp"

#include <cmath>
#include <string>

namespace wfem {

int MlpSpec::fan_in(int layer) const {
  return layer == 0 ? input_dim : hidden[layer - 1];
}

int MlpSpec::fan_out(int layer) const {
  return layer == static_cast<int>(hidden.size()) ? output_dim : hidden[layer];
}

int MlpSpec::param_count() const {
  int n = 0;
  for (int layer = 0; layer < layer_count(); ++layer) {
    n += fan_in(layer) * fan_out(layer) + fan_out(layer);
  }
  return n;
}

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw ShapeError("MlpSpec: input_dim and output_dim must be >= 1");
  }
  for (int w : hidden) {
    if (w < 1) throw ShapeError("MlpSpec: all hidden widths must be >= 1");
  }
}

ParamLayoutPtr ParamLayout::make(MlpSpec mean, MlpSpec feature) {
  mean.validate();
  feature.validate();
  auto layout = std::make_shared<ParamLayout>();
  layout->mean_net = std::move(mean);
  layout->feature_net = std::move(feature);
  layout->mean_offset = 0;
  layout->feature_offset = layout->mean_net.param_count();
  layout->total = layout->feature_offset + layout->feature_net.param_count();
  return layout;
}

HyperParams zero_params(ParamLayoutPtr layout) {
  HyperParams p;
  p.values = Eigen::VectorXd::Zero(layout->total);
  p.layout = std::move(layout);
  return p;
}

HyperParams init_params(ParamLayoutPtr layout, Rng& rng, double scale) {
  if (scale <= 0.0) throw DomainError("init_params: scale must be positive");
  HyperParams p = zero_params(layout);
  for (Block block : {Block::MeanNet, Block::FeatureNet}) {
    detail::for_each_layer(*p.layout, block,
                           [&](int w_off, int in, int out, int /*b_off*/, bool) {
                             const double stddev = scale / std::sqrt(static_cast<double>(in));
                             for (int i = 0; i < in * out; ++i) {
                               p.values[w_off + i] = rng.normal(0.0, stddev);
                             }
                           });
  }
  return p;
}

namespace {

Eigen::MatrixXd forward_impl(const HyperParams& params, Block block,
                             const Eigen::MatrixXd& inputs) {
  const MlpSpec& spec = params.layout->spec(block);
  if (inputs.cols() != spec.input_dim) {
    throw ShapeError("mlp_forward: input has dimension " +
                     std::to_string(inputs.cols()) + ", spec expects " +
                     std::to_string(spec.input_dim));
  }
  Eigen::MatrixXd h = inputs;
  detail::for_each_layer(
      *params.layout, block,
      [&](int w_off, int in, int out, int b_off, bool last) {
        Eigen::Map<const Eigen::MatrixXd> w(params.values.data() + w_off, in, out);
        Eigen::Map<const Eigen::RowVectorXd> b(params.values.data() + b_off, out);
        h = (h * w).rowwise() + b;
        if (!last) h = h.array().tanh().matrix();
      });
  return h;
}

}  // namespace

Eigen::VectorXd mlp_forward(const HyperParams& params, Block block,
                            const Eigen::VectorXd& input) {
  Eigen::MatrixXd out = forward_impl(params, block, input.transpose());
  return out.row(0).transpose();
}

Eigen::MatrixXd mlp_forward_batch(const HyperParams& params, Block block,
                                  const Eigen::MatrixXd& inputs) {
  return forward_impl(params, block, inputs);
}

}  // namespace wfem
