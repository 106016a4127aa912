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

#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "wfem/meta.hpp"

using namespace wfem;
using wfem::testing::random_params;
using wfem::testing::random_regression_task;
using wfem::testing::relative_error;
using wfem::testing::tiny_model;

namespace {

MetaDataset small_meta(int n_source, int n_target, std::uint64_t seed,
                       int m = 3) {
  std::vector<TaskDataset> tasks;
  for (int i = 0; i < n_source; ++i) {
    tasks.push_back(
        random_regression_task(seed + i, m, 1, Environment::Source));
  }
  for (int i = 0; i < n_target; ++i) {
    tasks.push_back(
        random_regression_task(seed + 100 + i, m, 1, Environment::Target));
  }
  return make_meta_dataset(std::move(tasks), Problem::Regression);
}

}  // namespace

TEST_CASE("task_loss: single sample with unit variance") {
  ModelConfig model;
  model.mean_net = MlpSpec{1, {}, 1};
  model.feature_net = MlpSpec{1, {}, 1};
  model.noise_variance = 0.5;
  HyperParams p = zero_params(model.make_layout());
  p.values[p.layout->feature_offset] = 1.0;

  TaskDataset task;
  task.x.resize(1, 1);
  task.x << 0.3;
  task.y.resize(1);
  task.y << 0.0;
  CHECK(task_loss(p, model, task, Problem::Regression) ==
        doctest::Approx(0.9189385).epsilon(1e-6));
}

TEST_CASE("task_loss: equals -evidence / M on random tasks") {
  const ModelConfig model = tiny_model();
  for (int trial = 0; trial < 10; ++trial) {
    const HyperParams p = random_params(model, trial + 7);
    const int m = 1 + trial % 5;
    const TaskDataset task = random_regression_task(trial, m);
    const double evidence = log_marginal_likelihood(p, model, task);
    CHECK(task_loss(p, model, task, Problem::Regression) == -evidence / m);
  }
}

TEST_CASE("meta_loss: single task and two-task mean") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 2);
  const std::vector<TaskDataset> tasks = {random_regression_task(1, 3),
                                          random_regression_task(2, 4)};
  const double l0 = task_loss(p, model, tasks[0], Problem::Regression);
  const double l1 = task_loss(p, model, tasks[1], Problem::Regression);
  CHECK(meta_loss(p, model, {tasks.data(), 1}, Problem::Regression) == l0);
  CHECK(meta_loss(p, model, {tasks.data(), 2}, Problem::Regression) ==
        doctest::Approx((l0 + l1) / 2.0).epsilon(1e-15));
  CHECK_THROWS_AS(
      meta_loss(p, model, std::span<const TaskDataset>{}, Problem::Regression),
      DomainError);
}

TEST_CASE("meta_loss: canonical reduction is bitwise reproducible") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 3);
  MetaDataset meta = small_meta(2, 3, 10);
  const double a =
      meta_loss(p, model, std::span<const TaskDataset>(meta.tasks),
                Problem::Regression);

  // permute, then restore the canonical order by id and recompute
  std::vector<TaskDataset> shuffled = {meta.tasks[4], meta.tasks[1],
                                       meta.tasks[0], meta.tasks[3],
                                       meta.tasks[2]};
  std::vector<TaskDataset> restored;
  for (const TaskDataset& original : meta.tasks) {
    for (const TaskDataset& t : shuffled) {
      if (t.id == original.id) restored.push_back(t);
    }
  }
  MetaDataset rebuilt = make_meta_dataset(std::move(restored), meta.problem);
  const double b =
      meta_loss(p, model, std::span<const TaskDataset>(rebuilt.tasks),
                Problem::Regression);
  CHECK(a == b);
}

TEST_CASE("weighted_meta_loss: endpoints are exact") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 4);
  const MetaDataset meta = small_meta(2, 2, 20);
  const double ls =
      meta_loss(p, model, meta.source_tasks(), Problem::Regression);
  const double lt =
      meta_loss(p, model, meta.target_tasks(), Problem::Regression);
  CHECK(weighted_meta_loss(p, model, meta, 1.0) == ls);
  CHECK(weighted_meta_loss(p, model, meta, 0.0) == lt);
  CHECK(weighted_meta_loss(p, model, meta, 0.5) ==
        doctest::Approx(0.5 * ls + 0.5 * lt).epsilon(1e-15));
}

TEST_CASE("weighted_meta_loss: required subset must be non-empty") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 5);
  const MetaDataset all_target = small_meta(0, 3, 30);
  CHECK_THROWS_AS(weighted_meta_loss(p, model, all_target, 0.5), DomainError);
  CHECK_NOTHROW(weighted_meta_loss(p, model, all_target, 0.0));
  const MetaDataset all_source = small_meta(3, 0, 40);
  CHECK_THROWS_AS(weighted_meta_loss(p, model, all_source, 0.5), DomainError);
  CHECK_NOTHROW(weighted_meta_loss(p, model, all_source, 1.0));
}

TEST_CASE("weighted_meta_loss: beta=0 degenerates to the plain meta loss") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 6);
  const MetaDataset meta = small_meta(0, 4, 50);
  CHECK(weighted_meta_loss(p, model, meta, 0.0) ==
        meta_loss(p, model, std::span<const TaskDataset>(meta.tasks),
                  Problem::Regression));
}

TEST_CASE("default_temperature: N=30, M=5 gives 30/7") {
  const std::vector<int> counts(30, 5);
  const TemperatureResult pacoh = default_temperature(counts, MetaMode::Pacoh);
  const TemperatureResult wfem = default_temperature(counts, MetaMode::Wfem);
  CHECK(std::abs(pacoh.gamma - 30.0 / 7.0) < 1e-12);
  CHECK(wfem.gamma == pacoh.gamma);
  CHECK(wfem.gamma == 1.0 / (1.0 / 30.0 + 1.0 / 5.0));
  CHECK_FALSE(wfem.harmonic_fallback);
}

TEST_CASE("default_temperature: N=1, M=1 gives 1/2") {
  const std::vector<int> counts = {1};
  CHECK(default_temperature(counts, MetaMode::Pacoh).gamma ==
        doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("default_temperature: harmonic mean of {2,4} is 8/3") {
  const std::vector<int> counts = {2, 4};
  const TemperatureResult pacoh = default_temperature(counts, MetaMode::Pacoh);
  // 1/gamma = 1/2 + 3/8 = 7/8
  CHECK(pacoh.gamma == doctest::Approx(8.0 / 7.0).epsilon(1e-14));
  const TemperatureResult wfem = default_temperature(counts, MetaMode::Wfem);
  CHECK(wfem.harmonic_fallback);
  CHECK(wfem.gamma == pacoh.gamma);
}

TEST_CASE("log_gibbs_density: prior-dominated differences") {
  // with gamma ~ 0 the density differences equal the prior differences
  const ModelConfig model = tiny_model();
  const MetaDataset meta = small_meta(1, 1, 60);
  MetaConfig cfg;
  cfg.gamma = 0.0;
  cfg.alpha = 0.5;
  cfg.hyper_prior_variance = 2.0;
  const HyperParams a = random_params(model, 61);
  const HyperParams b = random_params(model, 62);
  const double da = log_gibbs_density(a, model, meta, cfg);
  const double db = log_gibbs_density(b, model, meta, cfg);
  const double prior_a = -a.values.squaredNorm() / 4.0;
  const double prior_b = -b.values.squaredNorm() / 4.0;
  CHECK(da - db == doctest::Approx(prior_a - prior_b).epsilon(1e-12));
}

TEST_CASE("log_gibbs_density: zero parameters leave only the loss term") {
  const ModelConfig model = tiny_model();
  const MetaDataset meta = small_meta(1, 2, 70);
  MetaConfig cfg;
  cfg.alpha = 0.25;
  cfg.gamma = 1.7;
  const HyperParams zero = zero_params(model.make_layout());
  CHECK(log_gibbs_density(zero, model, meta, cfg) ==
        -cfg.gamma * weighted_meta_loss(zero, model, meta, cfg.alpha));
}

TEST_CASE("log_gibbs_density: wfem with no source equals pacoh bitwise") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 71);
  const MetaDataset meta = small_meta(0, 4, 80);
  MetaConfig wfem_cfg;
  wfem_cfg.mode = MetaMode::Wfem;
  wfem_cfg.alpha = 0.0;
  wfem_cfg.gamma = 1.3;
  MetaConfig pacoh_cfg = wfem_cfg;
  pacoh_cfg.mode = MetaMode::Pacoh;
  CHECK(log_gibbs_density(p, model, meta, wfem_cfg) ==
        log_gibbs_density(p, model, meta, pacoh_cfg));
}

TEST_CASE("log_gibbs_density: invariant under task id relabeling") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 72);
  MetaDataset meta = small_meta(2, 2, 90);
  MetaConfig cfg;
  cfg.alpha = 0.4;
  const double before = log_gibbs_density(p, model, meta, cfg);
  for (TaskDataset& t : meta.tasks) t.id = "renamed-" + t.id;
  CHECK(log_gibbs_density(p, model, meta, cfg) == before);
}

TEST_CASE("log_gibbs_density: larger parameter norm lowers the density") {
  const ModelConfig model = tiny_model();
  const MetaDataset meta = small_meta(1, 1, 95);
  MetaConfig cfg;
  cfg.gamma = 0.0;  // hold the loss term fixed at zero weight
  cfg.alpha = 0.5;
  const HyperParams p = random_params(model, 96);
  HyperParams scaled = p;
  scaled.values *= 2.0;
  CHECK(log_gibbs_density(scaled, model, meta, cfg) <
        log_gibbs_density(p, model, meta, cfg));
}

TEST_CASE("grad_log_gibbs_density: matches per-task recomputation") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 73);
  const MetaDataset meta = small_meta(2, 3, 101);
  MetaConfig cfg;
  cfg.alpha = 0.3;
  cfg.gamma = 2.5;
  cfg.hyper_prior_variance = 1.5;

  const ScoreResult got = grad_log_gibbs_density(p, model, meta, cfg);

  // oracle: gamma-weighted sum of individual task-loss gradients plus the
  // prior gradient, each task differentiated on its own tape
  Eigen::VectorXd want = -p.values / cfg.hyper_prior_variance;
  const auto add_tasks = [&](std::span<const TaskDataset> tasks, double w) {
    for (const TaskDataset& task : tasks) {
      const ad::GradResult res = ad::grad_scalar(p, [&](ad::Tape& t) {
        return evidence_on_tape(t, p, model, task);
      });
      want += cfg.gamma * w / static_cast<double>(tasks.size()) * res.grad /
              task.size();
    }
  };
  add_tasks(meta.source_tasks(), cfg.alpha);
  add_tasks(meta.target_tasks(), 1.0 - cfg.alpha);

  CHECK(relative_error(got.grad, want) < 1e-10);
  CHECK(got.value ==
        doctest::Approx(log_gibbs_density(p, model, meta, cfg)).epsilon(1e-12));
}
