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

#ifndef WFEM_ENVIRONMENTS_HPP_
#define WFEM_ENVIRONMENTS_HPP_

#include <string>
#include <vector>

#include "wfem/meta.hpp"

namespace wfem {

/// Sinusoid task environment. Only c_mean (mu_c) differs between the source
/// and the target environments; everything else is fixed.
struct SinusoidEnvParams {
  double c_mean = 0.0;
  double a_mean = 0.5, a_std = 0.2;
  double b_lo = 0.7, b_hi = 1.3;
  double c_std = 0.1;
  double d_mean = 5.0, d_std = 0.1;
};

/// One realized task: f(x) = a x + b sin(1.5 (x - c)) + d.
struct SinusoidTask {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  double value(double x) const {
    return a * x + b * std::sin(1.5 * (x - c)) + d;
  }
};

SinusoidTask sample_sinusoid_task(const SinusoidEnvParams& env, Rng& rng);

/// M i.i.d. pairs with x ~ Unif(-5, 5), y ~ N(f(x), noise_std^2).
TaskDataset generate_task_dataset(const SinusoidTask& task, int num_samples,
                                  double noise_std, Rng& rng,
                                  Environment environment = Environment::Unlabeled,
                                  std::string id = {});

/// round(beta*N) source tasks followed by target tasks, per-task seeds
/// derived from (master_seed, task index) so the grid of tasks is stable
/// under insertions.
MetaDataset build_meta_dataset(int num_tasks, double beta,
                               const SinusoidEnvParams& source,
                               const SinusoidEnvParams& target, int samples_per_task,
                               double noise_std, std::uint64_t master_seed);

/// Synthetic binary-classification environment: two isotropic Gaussian
/// clusters at +/- radius * (cos angle, sin angle); each task jitters the
/// angle around the environment mean. The target environment rotates the
/// mean angle by the shift delta.
struct SyntheticClassEnv {
  double mean_angle = 0.0;
  double angle_std = 0.2;
  double radius = 1.0;
  double cluster_std = 0.5;
};

SyntheticClassEnv shifted_class_env(const SyntheticClassEnv& base, double delta);

struct ClassTask {
  double angle = 0.0;
  double radius = 1.0;
  double cluster_std = 0.5;
  Eigen::Vector2d center(int label) const {
    const double sign = label == 1 ? 1.0 : -1.0;
    return sign * radius * Eigen::Vector2d(std::cos(angle), std::sin(angle));
  }
};

struct ClassTaskData {
  TaskDataset train;  // shots per class
  TaskDataset query;  // held-out points per class
  ClassTask task;
};

/// Balanced 2-way sample: `shots` training points per class plus
/// `query_per_class` held-out points per class (15 by default).
ClassTaskData sample_class_task(const SyntheticClassEnv& env, int shots,
                                Rng& rng, int query_per_class = 15,
                                Environment environment = Environment::Unlabeled,
                                std::string id = {});

MetaDataset build_class_meta_dataset(int num_tasks, double beta,
                                     const SyntheticClassEnv& source,
                                     const SyntheticClassEnv& target, int shots,
                                     std::uint64_t master_seed);

/// Held-out evaluation task: a training split, a disjoint held-out split,
/// and (regression only) the realized ground-truth function.
struct TestTask {
  TaskDataset train;
  TaskDataset holdout;
  SinusoidTask truth;
};

std::vector<TestTask> make_regression_test_tasks(int count,
                                                 const SinusoidEnvParams& env,
                                                 int samples_per_task,
                                                 double noise_std,
                                                 std::uint64_t master_seed);

std::vector<TestTask> make_class_test_tasks(int count,
                                            const SyntheticClassEnv& env,
                                            int shots, int query_per_class,
                                            std::uint64_t master_seed);

/// On-disk meta-dataset format:
/// {"schema": "wfem-gp/v1", "problem": "regression"|"classification",
///  "tasks": [{"id", "environment", "x": [[...]...], "y": [...]}]}
void save_meta_dataset(const MetaDataset& meta, const std::string& path);

/// Validates the schema, environment tags and dimensional consistency;
/// classification labels -1/+1 are mapped to 0/1 on load. Canonical ordering
/// is applied.
MetaDataset load_meta_dataset(const std::string& path);

}  // namespace wfem

#endif  // WFEM_ENVIRONMENTS_HPP_
