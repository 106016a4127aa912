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

#include "wfem/meta.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wfem {

MetaDataset make_meta_dataset(std::vector<TaskDataset> tasks, Problem problem) {
  std::stable_partition(tasks.begin(), tasks.end(), [](const TaskDataset& t) {
    return t.environment == Environment::Source;
  });
  MetaDataset meta;
  meta.num_source = static_cast<int>(
      std::count_if(tasks.begin(), tasks.end(), [](const TaskDataset& t) {
        return t.environment == Environment::Source;
      }));
  meta.tasks = std::move(tasks);
  meta.problem = problem;
  return meta;
}

double task_loss(const HyperParams& params, const ModelConfig& model,
                 const TaskDataset& task, Problem problem,
                 const LaplaceConfig& laplace) {
  if (task.size() < 1) throw DomainError("task_loss: task is empty");
  const double evidence =
      problem == Problem::Regression
          ? log_marginal_likelihood(params, model, task)
          : approx_log_marginal(params, model, task, laplace);
  return -evidence / task.size();
}

double meta_loss(const HyperParams& params, const ModelConfig& model,
                 std::span<const TaskDataset> tasks, Problem problem,
                 const LaplaceConfig& laplace) {
  if (tasks.empty()) throw DomainError("meta_loss: task list is empty");
  double acc = 0.0;
  for (const TaskDataset& task : tasks) {
    acc += task_loss(params, model, task, problem, laplace);
  }
  return acc / static_cast<double>(tasks.size());
}

double weighted_meta_loss(const HyperParams& params, const ModelConfig& model,
                          const MetaDataset& meta, double alpha,
                          const LaplaceConfig& laplace) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw DomainError("weighted_meta_loss: alpha must lie in [0, 1]");
  }
  if (alpha > 0.0 && meta.num_source == 0) {
    throw DomainError("weighted_meta_loss: source subset is empty");
  }
  if (alpha < 1.0 && meta.num_target() == 0) {
    throw DomainError("weighted_meta_loss: target subset is empty");
  }
  if (alpha == 0.0) {
    return meta_loss(params, model, meta.target_tasks(), meta.problem, laplace);
  }
  if (alpha == 1.0) {
    return meta_loss(params, model, meta.source_tasks(), meta.problem, laplace);
  }
  const double source =
      meta_loss(params, model, meta.source_tasks(), meta.problem, laplace);
  const double target =
      meta_loss(params, model, meta.target_tasks(), meta.problem, laplace);
  return alpha * source + (1.0 - alpha) * target;
}

TemperatureResult default_temperature(std::span<const int> sample_counts,
                                      MetaMode mode) {
  const int n = static_cast<int>(sample_counts.size());
  if (n < 1) throw DomainError("default_temperature: no tasks");
  for (int m : sample_counts) {
    if (m < 1) throw DomainError("default_temperature: all M_i must be >= 1");
  }
  const bool equal = std::all_of(
      sample_counts.begin(), sample_counts.end(),
      [&](int m) { return m == sample_counts.front(); });

  TemperatureResult result;
  if (equal) {
    // Harmonic mean of identical counts is the count itself, so both rules
    // produce the identical expression here.
    const double m = static_cast<double>(sample_counts.front());
    result.gamma = 1.0 / (1.0 / n + 1.0 / m);
    return result;
  }
  if (mode == MetaMode::Wfem) result.harmonic_fallback = true;
  double inv_sum = 0.0;
  for (int m : sample_counts) inv_sum += 1.0 / static_cast<double>(m);
  const double mtilde = 1.0 / (inv_sum / n);
  result.gamma = 1.0 / (1.0 / n + 1.0 / mtilde);
  return result;
}

double log_gibbs_density(const HyperParams& params, const ModelConfig& model,
                         const MetaDataset& meta, const MetaConfig& cfg) {
  const double loss =
      cfg.mode == MetaMode::Wfem
          ? weighted_meta_loss(params, model, meta, cfg.alpha, cfg.laplace)
          : meta_loss(params, model,
                      std::span<const TaskDataset>(meta.tasks), meta.problem,
                      cfg.laplace);
  const double log_prior =
      -params.values.squaredNorm() / (2.0 * cfg.hyper_prior_variance);
  return log_prior - cfg.gamma * loss;
}

MetaBatch full_batch(const MetaDataset& meta) {
  MetaBatch batch;
  batch.total_source = meta.num_source;
  batch.total_target = meta.num_target();
  batch.problem = meta.problem;
  for (int i = 0; i < meta.num_source; ++i) {
    batch.source.push_back(&meta.tasks[i]);
  }
  for (int i = meta.num_source; i < meta.size(); ++i) {
    batch.target.push_back(&meta.tasks[i]);
  }
  return batch;
}

namespace {

/// First `take` indices of a partial Fisher-Yates shuffle of [0, pool),
/// returned ascending so reductions stay canonical.
std::vector<int> sample_indices(int pool, int take, Rng& rng) {
  std::vector<int> idx(pool);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < take; ++i) {
    const int j = i + rng.uniform_int(pool - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

MetaBatch sample_meta_batch(const MetaDataset& meta, int n, Rng& rng) {
  const int total = meta.size();
  if (n < 1 || n > total) {
    throw DomainError("sample_meta_batch: need 1 <= n <= N");
  }
  const int ns_total = meta.num_source;
  const int nt_total = meta.num_target();

  int n_src = static_cast<int>(
      std::llround(static_cast<double>(n) * ns_total / total));
  const int rounded = n_src;
  n_src = std::min(n_src, ns_total);
  if (n - n_src > nt_total) n_src = n - nt_total;
  // keep both strata represented when both exist and the batch allows it
  if (ns_total > 0 && nt_total > 0 && n >= 2) {
    n_src = std::clamp(n_src, 1, n - 1);
    n_src = std::min(n_src, ns_total);
    if (n - n_src > nt_total) n_src = n - nt_total;
  }

  MetaBatch batch;
  batch.total_source = ns_total;
  batch.total_target = nt_total;
  batch.problem = meta.problem;
  batch.quota_adjusted = n_src != rounded;
  for (int i : sample_indices(ns_total, n_src, rng)) {
    batch.source.push_back(&meta.tasks[i]);
  }
  for (int i : sample_indices(nt_total, n - n_src, rng)) {
    batch.target.push_back(&meta.tasks[meta.num_source + i]);
  }
  return batch;
}

ScoreResult score_estimate(const HyperParams& params, const ModelConfig& model,
                           const MetaBatch& batch, const MetaConfig& cfg) {
  if (batch.size() == 0) throw DomainError("score_estimate: batch is empty");

  // Environment weights: the wfem density weighs the strata by alpha; the
  // pacoh density is the plain mean, i.e. alpha replaced by the realized
  // source fraction of the full dataset.
  const int total = batch.total_source + batch.total_target;
  const double w_source =
      cfg.mode == MetaMode::Wfem
          ? cfg.alpha
          : static_cast<double>(batch.total_source) / total;
  const double w_target =
      cfg.mode == MetaMode::Wfem
          ? 1.0 - cfg.alpha
          : static_cast<double>(batch.total_target) / total;
  if (w_source > 0.0 && batch.source.empty()) {
    throw DomainError("score_estimate: source sub-batch is empty");
  }
  if (w_target > 0.0 && batch.target.empty()) {
    throw DomainError("score_estimate: target sub-batch is empty");
  }

  ScoreResult result;
  ad::Tape tape;
  ad::Var theta = tape.param_vector(params);
  ad::Var acc = tape.scale(tape.dot(theta, theta),
                           -0.5 / cfg.hyper_prior_variance);

  auto add_stratum = [&](const std::vector<const TaskDataset*>& tasks,
                         double weight) {
    if (weight == 0.0 || tasks.empty()) return;
    const double coef = cfg.gamma * weight / static_cast<double>(tasks.size());
    for (const TaskDataset* task : tasks) {
      bool converged = true;
      ad::Var evidence =
          batch.problem == Problem::Regression
              ? evidence_on_tape(tape, params, model, *task)
              : class_evidence_on_tape(tape, params, model, *task, cfg.laplace,
                                       &converged);
      if (!converged) ++result.unconverged_tasks;
      acc = tape.add(acc, tape.scale(evidence, coef / task->size()));
    }
  };
  add_stratum(batch.source, w_source);
  add_stratum(batch.target, w_target);

  result.value = tape.scalar(acc);
  result.grad = tape.gradient(acc, params.size());
  return result;
}

ScoreResult grad_log_gibbs_density(const HyperParams& params,
                                   const ModelConfig& model,
                                   const MetaDataset& meta,
                                   const MetaConfig& cfg) {
  return score_estimate(params, model, full_batch(meta), cfg);
}

}  // namespace wfem
