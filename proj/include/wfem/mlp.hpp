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

#ifndef WFEM_MLP_HPP_
#define WFEM_MLP_HPP_

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "wfem/errors.hpp"
#include "wfem/rng.hpp"

namespace wfem {

enum class Activation { Tanh };

/// Fully connected network shape: input -> hidden layers -> linear output,
/// tanh between layers. Default is four hidden layers of 32 units.
struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden = {32, 32, 32, 32};
  int output_dim = 1;
  Activation activation = Activation::Tanh;

  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  int fan_in(int layer) const;
  int fan_out(int layer) const;
  int param_count() const;
  void validate() const;  // throws ShapeError on non-positive widths
};

enum class Block { MeanNet, FeatureNet };

/// Index ranges of the named parameter blocks inside the flat vector.
/// Within a block, each affine layer stores its weight matrix
/// (fan_in x fan_out, column-major) followed by its bias row.
struct ParamLayout {
  MlpSpec mean_net;
  MlpSpec feature_net;
  int mean_offset = 0;
  int feature_offset = 0;
  int total = 0;

  static std::shared_ptr<const ParamLayout> make(MlpSpec mean, MlpSpec feature);

  const MlpSpec& spec(Block b) const {
    return b == Block::MeanNet ? mean_net : feature_net;
  }
  int block_offset(Block b) const {
    return b == Block::MeanNet ? mean_offset : feature_offset;
  }
  int block_size(Block b) const { return spec(b).param_count(); }
};

using ParamLayoutPtr = std::shared_ptr<const ParamLayout>;

/// Flat hyperparameter vector theta (all weights and biases of both nets)
/// plus the layout that maps blocks to index ranges.
struct HyperParams {
  Eigen::VectorXd values;
  ParamLayoutPtr layout;

  int size() const { return static_cast<int>(values.size()); }
};

HyperParams zero_params(ParamLayoutPtr layout);

/// Weights i.i.d. N(0, (scale/sqrt(fan_in))^2), biases zero.
HyperParams init_params(ParamLayoutPtr layout, Rng& rng, double scale = 1.0);

/// Plain forward pass, the prediction-path evaluator. The differentiable
/// twin lives in tape.hpp.
Eigen::VectorXd mlp_forward(const HyperParams& params, Block block,
                            const Eigen::VectorXd& input);

/// Rows of `inputs` are input vectors; rows of the result are outputs.
Eigen::MatrixXd mlp_forward_batch(const HyperParams& params, Block block,
                                  const Eigen::MatrixXd& inputs);

namespace detail {
/// Calls fn(weight_offset, fan_in, fan_out, bias_offset, is_last) for every
/// affine layer of the block, with offsets into the flat vector.
template <typename Fn>
void for_each_layer(const ParamLayout& layout, Block block, Fn&& fn) {
  const MlpSpec& spec = layout.spec(block);
  int off = layout.block_offset(block);
  for (int layer = 0; layer < spec.layer_count(); ++layer) {
    const int in = spec.fan_in(layer);
    const int out = spec.fan_out(layer);
    fn(off, in, out, off + in * out, layer + 1 == spec.layer_count());
    off += in * out + out;
  }
}
}  // namespace detail

}  // namespace wfem

#endif  // WFEM_MLP_HPP_
