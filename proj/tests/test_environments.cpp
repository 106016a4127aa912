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

#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "wfem/environments.hpp"

using namespace wfem;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path("/tmp/wfem-test-" + name + "-" + std::to_string(::getpid())) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("sample_sinusoid_task: parameter statistics match the environment") {
  SinusoidEnvParams env;
  env.c_mean = 0.3;
  Rng rng(1);
  const int n = 100000;
  double a_mean = 0.0;
  bool b_in_support = true;
  for (int i = 0; i < n; ++i) {
    const SinusoidTask t = sample_sinusoid_task(env, rng);
    a_mean += t.a;
    if (t.b < 0.7 || t.b > 1.3) b_in_support = false;
  }
  a_mean /= n;
  CHECK(std::abs(a_mean - 0.5) < 0.01);
  CHECK(b_in_support);
}

TEST_CASE("sample_sinusoid_task: zero deviation keeps the seed stream identical") {
  SinusoidEnvParams source;
  source.c_mean = 0.4;
  SinusoidEnvParams target = source;  // mu'_c = mu_c
  Rng r1(9), r2(9);
  for (int i = 0; i < 50; ++i) {
    const SinusoidTask a = sample_sinusoid_task(source, r1);
    const SinusoidTask b = sample_sinusoid_task(target, r2);
    CHECK(a.a == b.a);
    CHECK(a.b == b.b);
    CHECK(a.c == b.c);
    CHECK(a.d == b.d);
  }
}

TEST_CASE("generate_task_dataset: support and noiseless limit") {
  SinusoidTask task{0.5, 1.0, 0.0, 5.0};
  Rng rng(3);
  const TaskDataset noiseless =
      generate_task_dataset(task, 200, 1e-12, rng, Environment::Target, "t");
  for (int i = 0; i < noiseless.size(); ++i) {
    CHECK(noiseless.x(i, 0) >= -5.0);
    CHECK(noiseless.x(i, 0) <= 5.0);
    CHECK(std::abs(noiseless.y[i] - task.value(noiseless.x(i, 0))) < 1e-9);
  }
}

TEST_CASE("generate_task_dataset: residual spread matches the noise level") {
  SinusoidTask task{0.5, 1.0, 0.0, 5.0};
  Rng rng(4);
  const TaskDataset data =
      generate_task_dataset(task, 100000, 0.1, rng, Environment::Target, "t");
  double var = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    const double r = data.y[i] - task.value(data.x(i, 0));
    var += r * r;
  }
  const double stddev = std::sqrt(var / data.size());
  CHECK(std::abs(stddev - 0.1) < 0.002);
}

TEST_CASE("build_meta_dataset: beta controls the environment split") {
  SinusoidEnvParams source, target;
  target.c_mean = 1.0;
  const MetaDataset all_target =
      build_meta_dataset(10, 0.0, source, target, 5, 0.1, 1);
  CHECK(all_target.num_source == 0);
  for (const TaskDataset& t : all_target.tasks) {
    CHECK(t.environment == Environment::Target);
  }
  const MetaDataset all_source =
      build_meta_dataset(10, 1.0, source, target, 5, 0.1, 1);
  CHECK(all_source.num_source == 10);
  const MetaDataset half = build_meta_dataset(30, 0.5, source, target, 5, 0.1, 1);
  CHECK(half.num_source == 15);
  CHECK(half.num_target() == 15);
}

TEST_CASE("build_meta_dataset: per-task seeds are stable under growth") {
  SinusoidEnvParams source, target;
  target.c_mean = 0.75;
  const MetaDataset small = build_meta_dataset(5, 0.0, source, target, 4, 0.1, 77);
  const MetaDataset big = build_meta_dataset(8, 0.0, source, target, 4, 0.1, 77);
  for (int i = 0; i < 5; ++i) {
    CHECK((small.tasks[i].x - big.tasks[i].x).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((small.tasks[i].y - big.tasks[i].y).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("source/target symmetry: swapping the means swaps the environments") {
  SinusoidEnvParams a, b;
  a.c_mean = 0.2;
  b.c_mean = 1.1;
  Rng r1(5), r2(5);
  const SinusoidTask ta = sample_sinusoid_task(a, r1);
  const SinusoidTask tb = sample_sinusoid_task(b, r2);
  // same stream: c differs by exactly the mean shift, the rest identical
  CHECK(ta.a == tb.a);
  CHECK(ta.c - a.c_mean == doctest::Approx(tb.c - b.c_mean).epsilon(1e-15));
}

TEST_CASE("sample_class_task: balanced labels and query split") {
  SyntheticClassEnv env;
  Rng rng(6);
  const ClassTaskData data = sample_class_task(env, 5, rng, 15,
                                               Environment::Target, "c");
  CHECK(data.train.size() == 10);
  CHECK(data.query.size() == 30);
  CHECK(data.train.y.sum() == 5.0);
  CHECK(data.query.y.sum() == 15.0);
}

TEST_CASE("sample_class_task: zero shift keeps source and target identical") {
  SyntheticClassEnv source;
  const SyntheticClassEnv target = shifted_class_env(source, 0.0);
  Rng r1(7), r2(7);
  const ClassTaskData a = sample_class_task(source, 5, r1, 15);
  const ClassTaskData b = sample_class_task(target, 5, r2, 15);
  CHECK((a.train.x - b.train.x).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.train.y - b.train.y).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("sample_class_task: Bayes rule separates well-separated clusters") {
  SyntheticClassEnv env;
  env.radius = 1.0;
  env.cluster_std = 0.35;  // about 5.7 sigma between centers
  Rng rng(8);
  int correct = 0, total = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const ClassTaskData data = sample_class_task(env, 5, rng, 15);
    const Eigen::Vector2d c0 = data.task.center(0);
    const Eigen::Vector2d c1 = data.task.center(1);
    const Eigen::Vector2d mid = 0.5 * (c0 + c1);
    const Eigen::Vector2d axis = c1 - c0;
    for (int i = 0; i < data.query.size(); ++i) {
      const Eigen::Vector2d x = data.query.x.row(i).transpose();
      const int label = (x - mid).dot(axis) > 0.0 ? 1 : 0;
      correct += label == static_cast<int>(data.query.y[i]) ? 1 : 0;
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / total > 0.95);
}

TEST_CASE("meta dataset file round-trip") {
  SinusoidEnvParams source, target;
  target.c_mean = 0.5;
  const MetaDataset meta = build_meta_dataset(6, 0.5, source, target, 4, 0.1, 9);
  TempFile file("roundtrip");
  save_meta_dataset(meta, file.path);
  const MetaDataset loaded = load_meta_dataset(file.path);
  REQUIRE(loaded.size() == meta.size());
  CHECK(loaded.num_source == meta.num_source);
  CHECK(loaded.problem == meta.problem);
  for (int i = 0; i < meta.size(); ++i) {
    CHECK(loaded.tasks[i].id == meta.tasks[i].id);
    CHECK(loaded.tasks[i].environment == meta.tasks[i].environment);
    CHECK((loaded.tasks[i].x - meta.tasks[i].x).lpNorm<Eigen::Infinity>() <
          1e-14);
    CHECK((loaded.tasks[i].y - meta.tasks[i].y).lpNorm<Eigen::Infinity>() <
          1e-14);
  }
}

TEST_CASE("load_meta_dataset: missing environment tag is rejected by task id") {
  TempFile file("noenv");
  std::ofstream out(file.path);
  out << R"({"schema": "wfem-gp/v1", "problem": "regression",
             "tasks": [{"id": "broken", "x": [[1.0]], "y": [2.0]}]})";
  out.close();
  try {
    load_meta_dataset(file.path);
    CHECK(false);
  } catch (const DomainError& err) {
    CHECK(std::string(err.what()).find("broken") != std::string::npos);
  }
}

TEST_CASE("load_meta_dataset: mixed input dimensions are rejected") {
  TempFile file("dims");
  std::ofstream out(file.path);
  out << R"({"schema": "wfem-gp/v1", "problem": "regression", "tasks": [
        {"id": "a", "environment": "target", "x": [[1.0]], "y": [2.0]},
        {"id": "b", "environment": "target", "x": [[1.0, 2.0]], "y": [2.0]}]})";
  out.close();
  CHECK_THROWS_AS(load_meta_dataset(file.path), DomainError);
}

TEST_CASE("load_meta_dataset: -1/+1 labels map onto 0/1") {
  TempFile file("labels");
  std::ofstream out(file.path);
  out << R"({"schema": "wfem-gp/v1", "problem": "classification", "tasks": [
        {"id": "a", "environment": "source",
         "x": [[0.0, 0.0], [1.0, 1.0]], "y": [-1, 1]}]})";
  out.close();
  const MetaDataset meta = load_meta_dataset(file.path);
  CHECK(meta.tasks[0].y[0] == 0.0);
  CHECK(meta.tasks[0].y[1] == 1.0);
}

TEST_CASE("load_meta_dataset: parse errors surface as DomainError") {
  TempFile file("parse");
  std::ofstream out(file.path);
  out << "{ not json";
  out.close();
  CHECK_THROWS_AS(load_meta_dataset(file.path), DomainError);
  CHECK_THROWS_AS(load_meta_dataset("/nonexistent/nowhere.json"), DomainError);
}

TEST_CASE("load_meta_dataset: unknown schema is rejected") {
  TempFile file("schema");
  std::ofstream out(file.path);
  out << R"({"schema": "other/v2", "problem": "regression", "tasks": []})";
  out.close();
  CHECK_THROWS_AS(load_meta_dataset(file.path), DomainError);
}
