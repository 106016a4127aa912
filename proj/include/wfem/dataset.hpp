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

#ifndef WFEM_DATASET_HPP_
#define WFEM_DATASET_HPP_

#include <Eigen/Dense>
#include <string>

namespace wfem {

enum class Environment { Source, Target, Unlabeled };

enum class Problem { Regression, Classification };

/// One task's observations. Rows of x are inputs; y holds real targets for
/// regression or 0/1 labels for classification.
struct TaskDataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Environment environment = Environment::Unlabeled;
  std::string id;

  int size() const { return static_cast<int>(y.size()); }
  int dim() const { return static_cast<int>(x.cols()); }
};

/// Gaussian predictive at a single query input.
struct GPPredictive {
  double mean = 0.0;
  double variance = 0.0;
};

}  // namespace wfem

#endif  // WFEM_DATASET_HPP_
