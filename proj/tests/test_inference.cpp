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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "wfem/inference.hpp"

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

ParticleEnsemble singleton(const Eigen::VectorXd& theta, ParamLayoutPtr layout) {
  ParticleEnsemble ens;
  ens.particles.push_back(HyperParams{theta, std::move(layout)});
  return ens;
}

}  // namespace

TEST_CASE("svgd_kernel: trivial values and symmetry") {
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 2.0;
  b << 1.0, 2.0;
  CHECK(svgd_kernel(a, b, 0.7) == 1.0);
  b << 2.0, 3.0;  // squared distance 2
  CHECK(svgd_kernel(a, b, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(svgd_kernel(a, b, 1.0) == doctest::Approx(0.3678794).epsilon(1e-6));
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd u(3), v(3);
    for (int j = 0; j < 3; ++j) {
      u[j] = rng.normal();
      v[j] = rng.normal();
    }
    CHECK(svgd_kernel(u, v, 2.0) == svgd_kernel(v, u, 2.0));
  }
}

TEST_CASE("svgd_step: K=1 reduces to a plain score step, bitwise") {
  const ModelConfig model = tiny_model();
  const auto layout = model.make_layout();
  const HyperParams p = random_params(model, 8);
  Eigen::VectorXd score(p.size());
  Rng rng(9);
  for (int i = 0; i < score.size(); ++i) score[i] = rng.normal();

  SvgdConfig cfg;
  cfg.step_size = 0.37;
  const ParticleEnsemble ens = singleton(p.values, layout);
  const ParticleEnsemble next = svgd_step(ens, {score}, cfg);
  const Eigen::VectorXd want = p.values + cfg.step_size * score;
  for (int i = 0; i < want.size(); ++i) {
    CHECK(next.particles[0].values[i] == want[i]);
  }
}

TEST_CASE("svgd_step: coincident particles with equal scores stay coincident") {
  const ModelConfig model = tiny_model();
  const auto layout = model.make_layout();
  const HyperParams p = random_params(model, 10);
  Eigen::VectorXd score = Eigen::VectorXd::Constant(p.size(), 0.25);
  ParticleEnsemble ens;
  ens.particles = {HyperParams{p.values, layout}, HyperParams{p.values, layout}};
  SvgdConfig cfg;
  cfg.step_size = 0.1;
  const ParticleEnsemble next = svgd_step(ens, {score, score}, cfg);
  CHECK((next.particles[0].values - next.particles[1].values)
            .lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("svgd_step: permutation equivariance") {
  const ModelConfig model = tiny_model();
  const auto layout = model.make_layout();
  ParticleEnsemble ens;
  std::vector<Eigen::VectorXd> scores;
  for (int k = 0; k < 3; ++k) {
    const HyperParams p = random_params(model, 20 + k);
    ens.particles.push_back(p);
    Rng rng(40 + k);
    Eigen::VectorXd s(p.size());
    for (int i = 0; i < s.size(); ++i) s[i] = rng.normal();
    scores.push_back(s);
  }
  SvgdConfig cfg;
  cfg.step_size = 0.05;
  cfg.length_scale = 3.0;  // fixed so the permuted median cannot differ
  const ParticleEnsemble base = svgd_step(ens, scores, cfg);

  ParticleEnsemble permuted;
  permuted.particles = {ens.particles[2], ens.particles[0], ens.particles[1]};
  const ParticleEnsemble next =
      svgd_step(permuted, {scores[2], scores[0], scores[1]}, cfg);
  // equivariant up to the reordered summation
  CHECK((next.particles[0].values - base.particles[2].values)
            .lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((next.particles[1].values - base.particles[0].values)
            .lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((next.particles[2].values - base.particles[1].values)
            .lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("svgd_fit_core: matches 1-D Gaussian target moments") {
  // target N(1, 0.25): score(theta) = -(theta - 1) / 0.25, acting on the
  // first coordinate of a minimal layout
  ModelConfig one;
  one.mean_net = MlpSpec{1, {}, 1};
  one.feature_net = MlpSpec{1, {}, 1};
  const auto layout = one.make_layout();

  SvgdConfig cfg;
  cfg.particles = 100;
  cfg.iterations = 2000;
  cfg.step_size = 0.05;
  cfg.seed = 5;

  Rng rng(cfg.seed);
  ParticleEnsemble init;
  for (int k = 0; k < cfg.particles; ++k) {
    HyperParams p = zero_params(layout);
    p.values.setZero();
    p.values[0] = rng.normal();  // only the first coordinate moves
    init.particles.push_back(std::move(p));
  }

  const ScoreField score = [](const Eigen::VectorXd& theta, int) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
    g[0] = -(theta[0] - 1.0) / 0.25;
    return g;
  };
  const ParticleEnsemble out = svgd_fit_core(score, std::move(init), cfg);

  double mean = 0.0;
  for (const HyperParams& p : out.particles) mean += p.values[0];
  mean /= cfg.particles;
  double var = 0.0;
  for (const HyperParams& p : out.particles) {
    var += (p.values[0] - mean) * (p.values[0] - mean);
  }
  var /= cfg.particles;
  CHECK(std::abs(mean - 1.0) < 0.05);
  CHECK(std::abs(std::sqrt(var) - 0.5) < 0.05);
}

TEST_CASE("map_fit_core: quadratic surrogate reaches the analytic minimum") {
  // minimize gamma (theta - c)^2 + theta^2 / (2 sigma_p^2)
  const double gamma = 2.0, c = 1.5, sigma_p2 = 0.8;
  const double want = 2.0 * gamma * c / (2.0 * gamma + 1.0 / sigma_p2);

  MapConfig cfg;
  cfg.iterations = 20000;
  cfg.adam.step_size = 5e-3;
  const ScoreField score = [&](const Eigen::VectorXd& theta, int) {
    Eigen::VectorXd g(1);
    g[0] = -2.0 * gamma * (theta[0] - c) - theta[0] / sigma_p2;
    return g;
  };
  Eigen::VectorXd theta0(1);
  theta0 << -3.0;
  const Eigen::VectorXd theta = map_fit_core(score, theta0, cfg);
  CHECK(std::abs(theta[0] - want) < 1e-6);
}

TEST_CASE("map_fit: prior-dominated limit pulls theta to zero") {
  const ModelConfig model = tiny_model();
  const MetaDataset meta = small_meta(0, 2, 7);
  MetaConfig meta_cfg;
  meta_cfg.alpha = 0.0;
  meta_cfg.gamma = 1e-12;
  meta_cfg.mode = MetaMode::Wfem;
  MapConfig cfg;
  cfg.iterations = 4000;
  cfg.batch_tasks = 2;
  cfg.adam.step_size = 1e-2;
  cfg.seed = 11;
  const HyperParams init = random_params(model, 12, 0.5);
  const HyperParams out = map_fit(meta, model, meta_cfg, cfg, init);
  CHECK(out.values.lpNorm<Eigen::Infinity>() < 1e-3);
}

TEST_CASE("map_fit: bitwise deterministic per seed") {
  const ModelConfig model = tiny_model();
  const MetaDataset meta = small_meta(2, 2, 17);
  MetaConfig meta_cfg;
  meta_cfg.alpha = 0.5;
  meta_cfg.gamma = 2.0;
  MapConfig cfg;
  cfg.iterations = 40;
  cfg.batch_tasks = 2;
  cfg.seed = 21;
  const HyperParams init = random_params(model, 22, 0.5);
  const HyperParams a = map_fit(meta, model, meta_cfg, cfg, init);
  const HyperParams b = map_fit(meta, model, meta_cfg, cfg, init);
  CHECK((a.values - b.values).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("score_estimate: full batch equals the exact gradient") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 31);
  const MetaDataset meta = small_meta(2, 3, 23);
  MetaConfig cfg;
  cfg.alpha = 0.35;
  cfg.gamma = 1.9;
  const ScoreResult full = score_estimate(p, model, full_batch(meta), cfg);
  const ScoreResult exact = grad_log_gibbs_density(p, model, meta, cfg);
  CHECK(relative_error(full.grad, exact.grad) < 1e-10);
}

TEST_CASE("score_estimate: gamma = 0 leaves the prior score") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 32);
  const MetaDataset meta = small_meta(1, 1, 29);
  MetaConfig cfg;
  cfg.alpha = 0.5;
  cfg.gamma = 0.0;
  cfg.hyper_prior_variance = 2.5;
  const ScoreResult res = score_estimate(p, model, full_batch(meta), cfg);
  CHECK((res.grad + p.values / cfg.hyper_prior_variance)
            .lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("score_estimate: enumerating stratified sub-batches is unbiased") {
  // 2 source + 2 target tasks, batch n = 2 -> one task per stratum; the
  // average over all four combinations must equal the exact gradient
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 33);
  const MetaDataset meta = small_meta(2, 2, 37);
  MetaConfig cfg;
  cfg.alpha = 0.6;
  cfg.gamma = 1.4;

  Eigen::VectorXd avg = Eigen::VectorXd::Zero(p.size());
  for (int si = 0; si < 2; ++si) {
    for (int ti = 0; ti < 2; ++ti) {
      MetaBatch batch;
      batch.total_source = 2;
      batch.total_target = 2;
      batch.problem = meta.problem;
      batch.source = {&meta.tasks[si]};
      batch.target = {&meta.tasks[2 + ti]};
      avg += score_estimate(p, model, batch, cfg).grad;
    }
  }
  avg /= 4.0;
  const ScoreResult exact = grad_log_gibbs_density(p, model, meta, cfg);
  CHECK(relative_error(avg, exact.grad) < 1e-12);
}

TEST_CASE("score_estimate: empty required sub-batch raises DomainError") {
  const ModelConfig model = tiny_model();
  const HyperParams p = random_params(model, 34);
  const MetaDataset meta = small_meta(2, 2, 41);
  MetaConfig cfg;
  cfg.alpha = 0.5;
  MetaBatch batch;
  batch.total_source = 2;
  batch.total_target = 2;
  batch.target = {&meta.tasks[2]};
  CHECK_THROWS_AS(score_estimate(p, model, batch, cfg), DomainError);
}

TEST_CASE("sample_meta_batch: stratified quotas in canonical order") {
  const MetaDataset meta = small_meta(3, 3, 43);
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const MetaBatch batch = sample_meta_batch(meta, 4, rng);
    CHECK(batch.size() == 4);
    CHECK(batch.source.size() == 2);
    CHECK(batch.target.size() == 2);
    for (size_t i = 1; i < batch.source.size(); ++i) {
      CHECK(batch.source[i - 1] < batch.source[i]);  // ascending addresses
    }
  }
  // all-target dataset keeps the source quota at zero
  const MetaDataset targets = small_meta(0, 4, 47);
  const MetaBatch batch = sample_meta_batch(targets, 2, rng);
  CHECK(batch.source.empty());
  CHECK(batch.target.size() == 2);
}

TEST_CASE("svgd_fit: K=1 equals manual score ascent on the same schedule") {
  const ModelConfig model = tiny_model();
  const MetaDataset meta = small_meta(0, 3, 53);
  MetaConfig meta_cfg;
  meta_cfg.alpha = 0.0;
  meta_cfg.gamma = 1.2;
  SvgdConfig cfg;
  cfg.particles = 1;
  cfg.iterations = 25;
  cfg.batch_tasks = 2;
  cfg.step_size = 1e-3;
  cfg.seed = 61;

  const ParticleEnsemble out = svgd_fit(meta, model, meta_cfg, cfg);

  // manual: same init draw, same batch stream, plain theta += eps * score
  const auto layout = model.make_layout();
  Rng init_rng(mix_seed(cfg.seed, stream::kInit));
  HyperParams theta =
      draw_hyper_prior(layout, meta_cfg.hyper_prior_variance, init_rng);
  Rng batch_rng(mix_seed(cfg.seed, stream::kBatch));
  for (int it = 0; it < cfg.iterations; ++it) {
    const MetaBatch batch = sample_meta_batch(meta, cfg.batch_tasks, batch_rng);
    const ScoreResult s = score_estimate(theta, model, batch, meta_cfg);
    theta.values += cfg.step_size * s.grad;
  }
  CHECK((out.particles[0].values - theta.values).lpNorm<Eigen::Infinity>() ==
        0.0);
}

TEST_CASE("svgd_fit: bitwise deterministic per seed") {
  const ModelConfig model = tiny_model();
  const MetaDataset meta = small_meta(2, 2, 59);
  MetaConfig meta_cfg;
  meta_cfg.alpha = 0.5;
  meta_cfg.gamma = 1.0;
  SvgdConfig cfg;
  cfg.particles = 3;
  cfg.iterations = 15;
  cfg.batch_tasks = 2;
  cfg.seed = 71;
  const ParticleEnsemble a = svgd_fit(meta, model, meta_cfg, cfg);
  const ParticleEnsemble b = svgd_fit(meta, model, meta_cfg, cfg);
  for (int k = 0; k < a.size(); ++k) {
    CHECK((a.particles[k].values - b.particles[k].values)
              .lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("svgd_fit: particles stay finite over many steps") {
  ModelConfig model;
  model.mean_net = MlpSpec{1, {4}, 1};
  model.feature_net = MlpSpec{1, {4}, 1};
  model.noise_variance = 0.01;
  const MetaDataset meta = small_meta(0, 4, 67, 3);
  MetaConfig meta_cfg;
  meta_cfg.alpha = 0.0;
  meta_cfg.gamma =
      default_temperature(std::vector<int>(4, 3), MetaMode::Wfem).gamma;
  SvgdConfig cfg;
  cfg.particles = 3;
  cfg.iterations = 10000;
  cfg.batch_tasks = 2;
  cfg.step_size = 1e-3;
  cfg.seed = 73;
  const ParticleEnsemble out = svgd_fit(meta, model, meta_cfg, cfg);
  for (const HyperParams& p : out.particles) CHECK(p.values.allFinite());
}
