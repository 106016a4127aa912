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

#ifndef WFEM_META_HPP_
#define WFEM_META_HPP_

#include <span>
#include <vector>

#include "wfem/gp_classify.hpp"
#include "wfem/rng.hpp"

namespace wfem {

/// Meta-training set in canonical order: source tasks first, then target
/// tasks, each block in ascending index order. All loss reductions follow
/// this order so results are reproducible across runs and thread counts.
struct MetaDataset {
  std::vector<TaskDataset> tasks;
  int num_source = 0;
  Problem problem = Problem::Regression;

  int size() const { return static_cast<int>(tasks.size()); }
  int num_target() const { return size() - num_source; }
  std::span<const TaskDataset> source_tasks() const {
    return {tasks.data(), static_cast<size_t>(num_source)};
  }
  std::span<const TaskDataset> target_tasks() const {
    return {tasks.data() + num_source, static_cast<size_t>(num_target())};
  }
};

/// Reorders tasks into canonical form (stable) and counts the source block.
MetaDataset make_meta_dataset(std::vector<TaskDataset> tasks, Problem problem);

enum class MetaMode { Pacoh, Wfem };

struct MetaConfig {
  double alpha = 0.5;               // weight on the source-environment loss
  double beta = 0.5;                // nominal source fraction (informational)
  double gamma = 1.0;               // temperature
  double hyper_prior_variance = 1.0;  // sigma_P^2 of the isotropic hyper-prior
  MetaMode mode = MetaMode::Wfem;
  LaplaceConfig laplace;            // classification tasks only
};

/// Per-task loss: -log p_theta(Y|X) / M.
double task_loss(const HyperParams& params, const ModelConfig& model,
                 const TaskDataset& task, Problem problem,
                 const LaplaceConfig& laplace = {});

/// Plain average of task_loss, reduced in the given order.
double meta_loss(const HyperParams& params, const ModelConfig& model,
                 std::span<const TaskDataset> tasks, Problem problem,
                 const LaplaceConfig& laplace = {});

/// alpha * L_source + (1 - alpha) * L_target. The endpoints return the pure
/// subset losses exactly.
double weighted_meta_loss(const HyperParams& params, const ModelConfig& model,
                          const MetaDataset& meta, double alpha,
                          const LaplaceConfig& laplace = {});

struct TemperatureResult {
  double gamma = 1.0;
  bool harmonic_fallback = false;  // wfem rule fell back to the harmonic mean
};

/// Temperature prescriptions: pacoh uses 1/gamma = 1/N + 1/Mtilde with the
/// harmonic mean Mtilde; wfem requires equal task sizes and uses
/// 1/gamma = 1/N + 1/M (falling back to the harmonic rule otherwise).
TemperatureResult default_temperature(std::span<const int> sample_counts,
                                      MetaMode mode);

/// Unnormalized log Gibbs hyper-posterior: log p(theta) - gamma * Lbar,
/// with the hyper-prior constant dropped. Pacoh mode uses the unweighted
/// meta loss over all tasks.
double log_gibbs_density(const HyperParams& params, const ModelConfig& model,
                         const MetaDataset& meta, const MetaConfig& cfg);

/// A stratified mini-batch of tasks, with the full-dataset stratum sizes
/// needed to keep the score estimator unbiased.
struct MetaBatch {
  std::vector<const TaskDataset*> source;
  std::vector<const TaskDataset*> target;
  int total_source = 0;
  int total_target = 0;
  Problem problem = Problem::Regression;
  bool quota_adjusted = false;  // rounding forced a quota shift

  int size() const {
    return static_cast<int>(source.size() + target.size());
  }
};

MetaBatch full_batch(const MetaDataset& meta);

/// Draws n tasks without replacement, stratified at the dataset's realized
/// source fraction; each stratum is returned in ascending (canonical) order.
MetaBatch sample_meta_batch(const MetaDataset& meta, int n, Rng& rng);

struct ScoreResult {
  double value = 0.0;        // batch estimate of the log Gibbs density
  Eigen::VectorXd grad;      // estimate of its theta-gradient
  int unconverged_tasks = 0; // classification Newton flags
};

/// Mini-batch score estimator of grad log q(theta | D). Each environment sum
/// is normalized by its realized sub-batch size, so the full batch reproduces
/// the exact gradient.
ScoreResult score_estimate(const HyperParams& params, const ModelConfig& model,
                           const MetaBatch& batch, const MetaConfig& cfg);

/// Exact gradient (full-batch score).
ScoreResult grad_log_gibbs_density(const HyperParams& params,
                                   const ModelConfig& model,
                                   const MetaDataset& meta,
                                   const MetaConfig& cfg);

}  // namespace wfem

#endif  // WFEM_META_HPP_
