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

#include "wfem/environments.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace wfem {

using nlohmann::json;

SinusoidTask sample_sinusoid_task(const SinusoidEnvParams& env, Rng& rng) {
  SinusoidTask task;
  task.a = rng.normal(env.a_mean, env.a_std);
  task.b = rng.uniform(env.b_lo, env.b_hi);
  task.c = rng.normal(env.c_mean, env.c_std);
  task.d = rng.normal(env.d_mean, env.d_std);
  return task;
}

TaskDataset generate_task_dataset(const SinusoidTask& task, int num_samples,
                                  double noise_std, Rng& rng,
                                  Environment environment, std::string id) {
  if (num_samples < 1) {
    throw DomainError("generate_task_dataset: need at least one sample");
  }
  if (noise_std <= 0.0) {
    throw DomainError("generate_task_dataset: noise_std must be positive");
  }
  TaskDataset data;
  data.x.resize(num_samples, 1);
  data.y.resize(num_samples);
  for (int m = 0; m < num_samples; ++m) {
    const double x = rng.uniform(-5.0, 5.0);
    data.x(m, 0) = x;
    data.y[m] = rng.normal(task.value(x), noise_std);
  }
  data.environment = environment;
  data.id = std::move(id);
  return data;
}

namespace {
int source_count(int num_tasks, double beta) {
  return static_cast<int>(std::llround(beta * num_tasks));
}
}  // namespace

MetaDataset build_meta_dataset(int num_tasks, double beta,
                               const SinusoidEnvParams& source,
                               const SinusoidEnvParams& target,
                               int samples_per_task, double noise_std,
                               std::uint64_t master_seed) {
  if (num_tasks < 1) throw DomainError("build_meta_dataset: need N >= 1");
  const int n_source = source_count(num_tasks, beta);
  std::vector<TaskDataset> tasks;
  tasks.reserve(num_tasks);
  for (int i = 0; i < num_tasks; ++i) {
    const bool is_source = i < n_source;
    Rng rng(mix_seed(master_seed, stream::kTask, static_cast<std::uint64_t>(i)));
    const SinusoidTask task =
        sample_sinusoid_task(is_source ? source : target, rng);
    tasks.push_back(generate_task_dataset(
        task, samples_per_task, noise_std, rng,
        is_source ? Environment::Source : Environment::Target,
        "task-" + std::to_string(i)));
  }
  return make_meta_dataset(std::move(tasks), Problem::Regression);
}

SyntheticClassEnv shifted_class_env(const SyntheticClassEnv& base, double delta) {
  SyntheticClassEnv env = base;
  env.mean_angle = base.mean_angle + delta;
  return env;
}

namespace {

TaskDataset sample_class_points(const ClassTask& task, int per_class, Rng& rng,
                                Environment environment, const std::string& id) {
  TaskDataset data;
  data.x.resize(2 * per_class, 2);
  data.y.resize(2 * per_class);
  // interleave the classes so truncating a balanced prefix stays balanced
  for (int i = 0; i < 2 * per_class; ++i) {
    const int label = i % 2;
    const Eigen::Vector2d c = task.center(label);
    data.x(i, 0) = rng.normal(c.x(), task.cluster_std);
    data.x(i, 1) = rng.normal(c.y(), task.cluster_std);
    data.y[i] = label;
  }
  data.environment = environment;
  data.id = id;
  return data;
}

}  // namespace

ClassTaskData sample_class_task(const SyntheticClassEnv& env, int shots,
                                Rng& rng, int query_per_class,
                                Environment environment, std::string id) {
  if (shots < 1) throw DomainError("sample_class_task: shots must be >= 1");
  ClassTaskData out;
  out.task.angle = rng.normal(env.mean_angle, env.angle_std);
  out.task.radius = env.radius;
  out.task.cluster_std = env.cluster_std;
  out.train = sample_class_points(out.task, shots, rng, environment, id);
  out.query =
      sample_class_points(out.task, query_per_class, rng, environment, id + "/query");
  return out;
}

MetaDataset build_class_meta_dataset(int num_tasks, double beta,
                                     const SyntheticClassEnv& source,
                                     const SyntheticClassEnv& target, int shots,
                                     std::uint64_t master_seed) {
  if (num_tasks < 1) throw DomainError("build_class_meta_dataset: need N >= 1");
  const int n_source = source_count(num_tasks, beta);
  std::vector<TaskDataset> tasks;
  tasks.reserve(num_tasks);
  for (int i = 0; i < num_tasks; ++i) {
    const bool is_source = i < n_source;
    Rng rng(mix_seed(master_seed, stream::kTask, static_cast<std::uint64_t>(i)));
    ClassTaskData sample = sample_class_task(
        is_source ? source : target, shots, rng, /*query_per_class=*/0,
        is_source ? Environment::Source : Environment::Target,
        "task-" + std::to_string(i));
    tasks.push_back(std::move(sample.train));
  }
  return make_meta_dataset(std::move(tasks), Problem::Classification);
}

std::vector<TestTask> make_regression_test_tasks(int count,
                                                 const SinusoidEnvParams& env,
                                                 int samples_per_task,
                                                 double noise_std,
                                                 std::uint64_t master_seed) {
  std::vector<TestTask> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(master_seed, stream::kTestTask,
                     static_cast<std::uint64_t>(i)));
    TestTask t;
    t.truth = sample_sinusoid_task(env, rng);
    t.train = generate_task_dataset(t.truth, samples_per_task, noise_std, rng,
                                    Environment::Target,
                                    "test-" + std::to_string(i));
    t.holdout = generate_task_dataset(t.truth, samples_per_task, noise_std, rng,
                                      Environment::Target,
                                      "test-" + std::to_string(i) + "/holdout");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TestTask> make_class_test_tasks(int count,
                                            const SyntheticClassEnv& env,
                                            int shots, int query_per_class,
                                            std::uint64_t master_seed) {
  std::vector<TestTask> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(master_seed, stream::kTestTask,
                     static_cast<std::uint64_t>(i)));
    ClassTaskData sample =
        sample_class_task(env, shots, rng, query_per_class, Environment::Target,
                          "test-" + std::to_string(i));
    TestTask t;
    t.train = std::move(sample.train);
    t.holdout = std::move(sample.query);
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

const char* environment_name(Environment e) {
  switch (e) {
    case Environment::Source: return "source";
    case Environment::Target: return "target";
    default: return "unlabeled";
  }
}

}  // namespace

void save_meta_dataset(const MetaDataset& meta, const std::string& path) {
  json doc;
  doc["schema"] = "wfem-gp/v1";
  doc["problem"] =
      meta.problem == Problem::Regression ? "regression" : "classification";
  json tasks = json::array();
  for (const TaskDataset& task : meta.tasks) {
    json t;
    t["id"] = task.id;
    t["environment"] = environment_name(task.environment);
    json rows = json::array();
    for (Eigen::Index i = 0; i < task.x.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < task.x.cols(); ++j) row.push_back(task.x(i, j));
      rows.push_back(std::move(row));
    }
    t["x"] = std::move(rows);
    json ys = json::array();
    for (Eigen::Index i = 0; i < task.y.size(); ++i) ys.push_back(task.y[i]);
    t["y"] = std::move(ys);
    tasks.push_back(std::move(t));
  }
  doc["tasks"] = std::move(tasks);

  std::ofstream out(path);
  if (!out) throw DomainError("save_meta_dataset: cannot open " + path);
  out << doc.dump(2) << "\n";
}

MetaDataset load_meta_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("load_meta_dataset: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& err) {
    throw DomainError("load_meta_dataset: " + std::string(err.what()));
  }

  if (!doc.contains("schema") || doc["schema"] != "wfem-gp/v1") {
    throw DomainError("load_meta_dataset: missing or unknown schema tag");
  }
  if (!doc.contains("problem") || !doc["problem"].is_string()) {
    throw DomainError("load_meta_dataset: missing problem field");
  }
  const std::string problem_name = doc["problem"];
  Problem problem;
  if (problem_name == "regression") {
    problem = Problem::Regression;
  } else if (problem_name == "classification") {
    problem = Problem::Classification;
  } else {
    throw DomainError("load_meta_dataset: unknown problem '" + problem_name + "'");
  }
  if (!doc.contains("tasks") || !doc["tasks"].is_array()) {
    throw DomainError("load_meta_dataset: missing tasks array");
  }

  std::vector<TaskDataset> tasks;
  int dim = -1;
  for (const json& t : doc["tasks"]) {
    TaskDataset task;
    task.id = t.value("id", "");
    const std::string where = task.id.empty() ? "<unnamed task>" : task.id;
    if (!t.contains("environment") || !t["environment"].is_string()) {
      throw DomainError("load_meta_dataset: task " + where +
                        " has no environment tag");
    }
    const std::string env = t["environment"];
    if (env == "source") {
      task.environment = Environment::Source;
    } else if (env == "target") {
      task.environment = Environment::Target;
    } else {
      throw DomainError("load_meta_dataset: task " + where +
                        " has unknown environment '" + env + "'");
    }
    if (!t.contains("x") || !t["x"].is_array() || !t.contains("y") ||
        !t["y"].is_array()) {
      throw DomainError("load_meta_dataset: task " + where + " needs x and y");
    }
    const json& rows = t["x"];
    const json& ys = t["y"];
    if (rows.size() != ys.size()) {
      throw DomainError("load_meta_dataset: task " + where +
                        " has mismatched x/y lengths");
    }
    const int m = static_cast<int>(rows.size());
    if (m == 0) {
      throw DomainError("load_meta_dataset: task " + where + " is empty");
    }
    const int d = static_cast<int>(rows.front().size());
    if (dim == -1) dim = d;
    if (d != dim) {
      throw DomainError("load_meta_dataset: task " + where +
                        " has input dimension " + std::to_string(d) +
                        ", expected " + std::to_string(dim));
    }
    task.x.resize(m, d);
    task.y.resize(m);
    for (int i = 0; i < m; ++i) {
      const json& row = rows[i];
      if (static_cast<int>(row.size()) != d) {
        throw DomainError("load_meta_dataset: task " + where +
                          " has ragged input rows");
      }
      for (int j = 0; j < d; ++j) task.x(i, j) = row[j].get<double>();
      double y = ys[i].get<double>();
      if (problem == Problem::Classification) {
        if (y == -1.0) y = 0.0;  // accept the -1/+1 convention
        if (y != 0.0 && y != 1.0) {
          throw DomainError("load_meta_dataset: task " + where +
                            " has non-binary label");
        }
      }
      task.y[i] = y;
    }
    tasks.push_back(std::move(task));
  }
  return make_meta_dataset(std::move(tasks), problem);
}

}  // namespace wfem
