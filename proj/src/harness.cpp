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

#include "wfem/harness.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <thread>
#include <utility>

namespace wfem {

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Gp: return "gp";
    case Scheme::PacohFullTarget: return "pacoh_full_target";
    case Scheme::PacohPartialTarget: return "pacoh_partial_target";
    case Scheme::Wfem: return "wfem";
  }
  return "unknown";
}

std::string approx_name(Approx a) {
  return a == Approx::Map ? "map" : "svgd";
}

std::optional<Scheme> parse_scheme(const std::string& name) {
  if (name == "gp") return Scheme::Gp;
  if (name == "pacoh_full_target") return Scheme::PacohFullTarget;
  if (name == "pacoh_partial_target") return Scheme::PacohPartialTarget;
  if (name == "wfem") return Scheme::Wfem;
  return {};
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("rmse: prediction/label lengths disagree");
  }
  if (predictions.size() == 0) throw DomainError("rmse: empty input");
  return std::sqrt((predictions - labels).squaredNorm() /
                   static_cast<double>(predictions.size()));
}

double mean_accuracy(const Eigen::VectorXd& predicted_labels,
                     const Eigen::VectorXd& labels) {
  if (predicted_labels.size() != labels.size()) {
    throw ShapeError("mean_accuracy: prediction/label lengths disagree");
  }
  if (labels.size() == 0) throw DomainError("mean_accuracy: empty input");
  return 1.0 - (predicted_labels - labels).cwiseAbs().mean();
}

namespace {

Eigen::VectorXd ensemble_mean_predictions(const HyperPosterior& posterior,
                                          const ModelConfig& model,
                                          const TaskDataset& data,
                                          const Eigen::MatrixXd& queries) {
  if (posterior.points.empty()) {
    throw DomainError("posterior has no points");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(queries.rows());
  for (const HyperParams& p : posterior.points) {
    const std::vector<GPPredictive> preds =
        posterior_predict_batch(p, model, data, queries);
    for (Eigen::Index i = 0; i < acc.size(); ++i) acc[i] += preds[i].mean;
  }
  return acc / static_cast<double>(posterior.points.size());
}

}  // namespace

double predictive_mean_ensemble(const HyperPosterior& posterior,
                                const ModelConfig& model, const TaskDataset& data,
                                const Eigen::VectorXd& x) {
  return ensemble_mean_predictions(posterior, model, data, x.transpose())(0);
}

GPPredictive predictive_mixture(const HyperPosterior& posterior,
                                const ModelConfig& model, const TaskDataset& data,
                                const Eigen::VectorXd& x) {
  if (posterior.points.empty()) throw DomainError("posterior has no points");
  double mean = 0.0, second = 0.0;
  for (const HyperParams& p : posterior.points) {
    const GPPredictive pred = posterior_predict(p, model, data, x);
    mean += pred.mean;
    second += pred.variance + pred.mean * pred.mean;
  }
  const double k = static_cast<double>(posterior.points.size());
  mean /= k;
  second /= k;
  return {mean, std::max(0.0, second - mean * mean)};
}

CellData make_cell_data(const ExperimentConfig& cfg, double alpha, double beta,
                        double deviation, std::uint64_t seed) {
  CellData cell;
  cell.alpha = alpha;
  cell.beta = beta;
  cell.deviation = deviation;
  if (cfg.problem == Problem::Regression) {
    SinusoidEnvParams source;
    source.c_mean = cfg.mu_c;
    SinusoidEnvParams target = source;
    target.c_mean = cfg.mu_c + deviation;
    cell.mixed = build_meta_dataset(cfg.n_tasks, beta, source, target,
                                    cfg.samples_per_task, cfg.sigma, seed);
    cell.all_target = build_meta_dataset(cfg.n_tasks, 0.0, source, target,
                                         cfg.samples_per_task, cfg.sigma, seed);
    cell.test_tasks = make_regression_test_tasks(
        cfg.test_tasks, target, cfg.samples_per_task, cfg.sigma, seed);
  } else {
    SyntheticClassEnv source;
    const SyntheticClassEnv target = shifted_class_env(source, deviation);
    cell.mixed = build_class_meta_dataset(cfg.n_tasks, beta, source, target,
                                          cfg.shots, seed);
    cell.all_target = build_class_meta_dataset(cfg.n_tasks, 0.0, source, target,
                                               cfg.shots, seed);
    cell.test_tasks = make_class_test_tasks(cfg.test_tasks, target, cfg.shots,
                                            cfg.query_per_class, seed);
  }
  if (cfg.meta_data_path) {
    // File-ingested meta-training tasks replace the generated ones. The
    // all-target reference reuses the file's target subset, so
    // pacoh_full_target and pacoh_partial_target coincide in this mode.
    MetaDataset loaded = load_meta_dataset(*cfg.meta_data_path);
    if (loaded.problem != cfg.problem) {
      throw DomainError("meta-data file problem type disagrees with command");
    }
    std::vector<TaskDataset> target_only(loaded.target_tasks().begin(),
                                         loaded.target_tasks().end());
    cell.all_target = make_meta_dataset(std::move(target_only), loaded.problem);
    cell.mixed = std::move(loaded);
  }
  return cell;
}

InitState make_init_state(const ExperimentConfig& cfg, ParamLayoutPtr layout,
                          std::uint64_t seed) {
  Rng rng(mix_seed(seed, stream::kInit));
  InitState init;
  init.theta0 = draw_hyper_prior(layout, cfg.train.hyper_prior_variance, rng);
  if (cfg.approx == Approx::Svgd) {
    init.ensemble = draw_ensemble(layout, cfg.train.hyper_prior_variance,
                                  cfg.particles, rng);
  }
  return init;
}

namespace {

HyperPosterior to_posterior(const InitState& init, Approx approx) {
  HyperPosterior post;
  if (approx == Approx::Map) {
    post.points = {init.theta0};
  } else {
    post.points = init.ensemble.particles;
  }
  return post;
}

HyperPosterior train_scheme(Scheme scheme, const CellData& cell,
                            const InitState& init, const ExperimentConfig& cfg,
                            std::uint64_t seed) {
  const MetaDataset* train = nullptr;
  MetaDataset partial_storage;
  MetaMode mode = MetaMode::Pacoh;
  double alpha = cell.alpha;
  switch (scheme) {
    case Scheme::Gp:
      break;  // untrained shared initialization
    case Scheme::Wfem:
      train = &cell.mixed;
      mode = MetaMode::Wfem;
      break;
    case Scheme::PacohFullTarget:
      train = &cell.all_target;
      break;
    case Scheme::PacohPartialTarget: {
      std::vector<TaskDataset> target_only(cell.mixed.target_tasks().begin(),
                                           cell.mixed.target_tasks().end());
      partial_storage =
          make_meta_dataset(std::move(target_only), cell.mixed.problem);
      train = &partial_storage;
      break;
    }
  }

  if (train == nullptr || train->size() == 0) {
    return to_posterior(init, cfg.approx);
  }

  std::vector<int> sizes;
  sizes.reserve(train->size());
  for (const TaskDataset& t : train->tasks) sizes.push_back(t.size());

  MetaConfig meta_cfg;
  meta_cfg.alpha = alpha;
  meta_cfg.beta = cell.beta;
  meta_cfg.gamma = default_temperature(sizes, mode).gamma;
  meta_cfg.hyper_prior_variance = cfg.train.hyper_prior_variance;
  meta_cfg.mode = mode;
  meta_cfg.laplace = cfg.train.laplace;

  HyperPosterior post;
  if (cfg.approx == Approx::Map) {
    MapConfig map_cfg;
    map_cfg.iterations = cfg.train.iterations;
    map_cfg.batch_tasks = cfg.train.batch_tasks;
    map_cfg.adam.step_size = cfg.train.learning_rate;
    map_cfg.seed = seed;
    post.points = {map_fit(*train, cfg.model, meta_cfg, map_cfg, init.theta0)};
  } else {
    SvgdConfig svgd_cfg;
    svgd_cfg.particles = cfg.particles;
    svgd_cfg.step_size = cfg.train.svgd_step_size;
    svgd_cfg.length_scale = cfg.train.svgd_length_scale;
    svgd_cfg.iterations = cfg.train.iterations;
    svgd_cfg.batch_tasks = cfg.train.batch_tasks;
    svgd_cfg.seed = seed;
    post.points =
        svgd_fit(*train, cfg.model, meta_cfg, svgd_cfg, init.ensemble).particles;
  }
  return post;
}

double evaluate_regression(const HyperPosterior& post,
                           const ExperimentConfig& cfg,
                           const std::vector<TestTask>& tasks) {
  double total = 0.0;
  for (const TestTask& task : tasks) {
    const Eigen::VectorXd preds =
        ensemble_mean_predictions(post, cfg.model, task.train, task.holdout.x);
    total += rmse(preds, task.holdout.y);
  }
  return total / static_cast<double>(tasks.size());
}

double evaluate_classification(const HyperPosterior& post,
                               const ExperimentConfig& cfg,
                               const std::vector<TestTask>& tasks,
                               std::uint64_t seed) {
  double total = 0.0;
  for (size_t ti = 0; ti < tasks.size(); ++ti) {
    const TestTask& task = tasks[ti];
    const std::uint64_t task_seed = mix_seed(seed, stream::kPredict, ti);
    Eigen::VectorXd prob = Eigen::VectorXd::Zero(task.holdout.size());
    for (size_t k = 0; k < post.points.size(); ++k) {
      const LaplaceState state = laplace_mode(post.points[k], cfg.model,
                                              task.train, cfg.train.laplace);
      const std::vector<GPPredictive> latents = latent_predict_batch(
          post.points[k], cfg.model, task.train, state, task.holdout.x);
      for (int q = 0; q < task.holdout.size(); ++q) {
        prob[q] += class_probability_from_moments(
            latents[q], cfg.train.class_prob_samples,
            mix_seed(task_seed, static_cast<std::uint64_t>(q), k));
      }
    }
    prob /= static_cast<double>(post.points.size());
    const Eigen::VectorXd labels =
        (prob.array() >= 0.5).cast<double>().matrix();
    total += mean_accuracy(labels, task.holdout.y);
  }
  return total / static_cast<double>(tasks.size());
}

}  // namespace

ResultRow run_scheme(Scheme scheme, const CellData& cell, const InitState& init,
                     const ExperimentConfig& cfg, std::uint64_t seed) {
  ResultRow row;
  row.scheme = scheme;
  row.approx = cfg.approx;
  row.alpha = cell.alpha;
  row.beta = cell.beta;
  row.deviation = cell.deviation;
  row.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    const HyperPosterior post = train_scheme(scheme, cell, init, cfg, seed);
    if (cfg.problem == Problem::Regression) {
      row.metric = "rmse";
      row.value = evaluate_regression(post, cfg, cell.test_tasks);
    } else {
      row.metric = "mean_accuracy";
      row.value = evaluate_classification(post, cfg, cell.test_tasks, seed);
    }
  } catch (const std::exception& err) {
    row.metric = "error";
    row.value = std::numeric_limits<double>::quiet_NaN();
    row.message = err.what();
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return row;
}

namespace {

struct ResolvedCell {
  double alpha, beta, deviation;
};

ResolvedCell resolve_cell(const ExperimentConfig& cfg, double grid_value) {
  switch (cfg.sweep) {
    case SweepVar::Deviation:
      return {cfg.alpha, cfg.beta, grid_value};
    case SweepVar::Beta:
      return {cfg.tie_alpha_beta ? grid_value : cfg.alpha, grid_value,
              cfg.deviation};
    case SweepVar::Alpha:
      return {grid_value, cfg.beta, cfg.deviation};
  }
  throw DomainError("resolve_cell: unknown sweep variable");
}

int thread_budget(size_t cells) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("WFEM_GP_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = cap;
  }
  return std::min<int>(n, static_cast<int>(cells));
}

}  // namespace

int sweep(const ExperimentConfig& cfg) {
  if (cfg.grid.empty()) throw DomainError("sweep: grid is empty");
  if (cfg.seeds.empty()) throw DomainError("sweep: seeds are empty");
  if (cfg.out_path.empty()) throw DomainError("sweep: no output path");

  const size_t n_seeds = cfg.seeds.size();
  const size_t n_cells = cfg.grid.size() * n_seeds;
  std::vector<std::vector<ResultRow>> results(n_cells);

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t idx = next.fetch_add(1);
      if (idx >= n_cells) break;
      const size_t gi = idx / n_seeds;
      const size_t si = idx % n_seeds;
      const ResolvedCell rc = resolve_cell(cfg, cfg.grid[gi]);
      const std::uint64_t seed = cfg.seeds[si];
      std::vector<ResultRow> rows;
      try {
        const CellData cell =
            make_cell_data(cfg, rc.alpha, rc.beta, rc.deviation, seed);
        const InitState init =
            make_init_state(cfg, cfg.model.make_layout(), seed);
        for (Scheme scheme : cfg.schemes) {
          rows.push_back(run_scheme(scheme, cell, init, cfg, seed));
        }
      } catch (const std::exception& err) {
        rows.clear();
        for (Scheme scheme : cfg.schemes) {
          ResultRow row;
          row.scheme = scheme;
          row.approx = cfg.approx;
          row.alpha = rc.alpha;
          row.beta = rc.beta;
          row.deviation = rc.deviation;
          row.seed = seed;
          row.metric = "error";
          row.value = std::numeric_limits<double>::quiet_NaN();
          row.message = err.what();
          rows.push_back(std::move(row));
        }
      }
      results[idx] = std::move(rows);
    }
  };

  const int n_threads = thread_budget(n_cells);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::ofstream out(cfg.out_path);
  if (!out) throw DomainError("sweep: cannot open " + cfg.out_path);
  out << "scheme,approx,alpha,beta,deviation,seed,metric,value";
  if (cfg.timings) out << ",wall_ms";
  out << "\n";

  int errors = 0;
  for (size_t gi = 0; gi < cfg.grid.size(); ++gi) {
    for (size_t sc = 0; sc < cfg.schemes.size(); ++sc) {
      for (size_t si = 0; si < n_seeds; ++si) {
        const ResultRow& row = results[gi * n_seeds + si][sc];
        if (row.is_error()) {
          ++errors;
          std::cerr << "error: " << scheme_name(row.scheme) << " seed "
                    << row.seed << ": " << row.message << "\n";
        }
        out << scheme_name(row.scheme) << ',' << approx_name(row.approx) << ','
            << format_double(row.alpha) << ',' << format_double(row.beta) << ','
            << format_double(row.deviation) << ',' << row.seed << ','
            << row.metric << ',' << format_double(row.value);
        if (cfg.timings) out << ',' << format_double(row.wall_ms);
        out << "\n";
      }
    }
  }
  return errors;
}

void export_posterior_curve(const ExperimentConfig& cfg,
                            const std::vector<double>& x_grid,
                            const std::string& out_path) {
  if (cfg.problem != Problem::Regression) {
    throw DomainError("export_posterior_curve: regression only");
  }
  if (x_grid.empty()) throw DomainError("export_posterior_curve: empty grid");
  if (cfg.seeds.empty()) throw DomainError("export_posterior_curve: no seeds");

  const std::uint64_t seed = cfg.seeds.front();
  const CellData cell =
      make_cell_data(cfg, cfg.alpha, cfg.beta, cfg.deviation, seed);
  const InitState init = make_init_state(cfg, cfg.model.make_layout(), seed);
  const TestTask& task = cell.test_tasks.front();

  std::vector<HyperPosterior> posteriors;
  posteriors.reserve(cfg.schemes.size());
  for (Scheme scheme : cfg.schemes) {
    posteriors.push_back(train_scheme(scheme, cell, init, cfg, seed));
  }

  std::ofstream out(out_path);
  if (!out) throw DomainError("export_posterior_curve: cannot open " + out_path);
  out << "x,truth";
  for (Scheme scheme : cfg.schemes) {
    out << ',' << scheme_name(scheme) << "_mean," << scheme_name(scheme)
        << "_std";
  }
  out << "\n";
  for (double x : x_grid) {
    Eigen::VectorXd query(1);
    query << x;
    out << format_double(x) << ',' << format_double(task.truth.value(x));
    for (size_t s = 0; s < posteriors.size(); ++s) {
      const GPPredictive pred =
          predictive_mixture(posteriors[s], cfg.model, task.train, query);
      out << ',' << format_double(pred.mean) << ','
          << format_double(std::sqrt(pred.variance));
    }
    out << "\n";
  }
}

}  // namespace wfem
