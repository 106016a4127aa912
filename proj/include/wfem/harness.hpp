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

#ifndef WFEM_HARNESS_HPP_
#define WFEM_HARNESS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "wfem/environments.hpp"
#include "wfem/inference.hpp"

namespace wfem {

enum class Scheme { Gp, PacohFullTarget, PacohPartialTarget, Wfem };
enum class Approx { Map, Svgd };
enum class SweepVar { Deviation, Beta, Alpha };

std::string scheme_name(Scheme s);
std::string approx_name(Approx a);
std::optional<Scheme> parse_scheme(const std::string& name);

/// Optimizer settings shared by every scheme of an experiment.
struct TrainConfig {
  int iterations = 1500;
  int batch_tasks = 5;
  double learning_rate = 5e-3;           // Adam step size
  double svgd_step_size = 1e-3;          // epsilon
  std::optional<double> svgd_length_scale;  // empty -> median heuristic
  double hyper_prior_variance = 1.0;     // sigma_P^2
  LaplaceConfig laplace;
  int class_prob_samples = 256;          // R per MC class probability
};

struct ExperimentConfig {
  Problem problem = Problem::Regression;
  int n_tasks = 30;
  int samples_per_task = 5;
  double sigma = 0.1;       // observation noise std (regression)
  double alpha = 0.5;
  double beta = 0.5;
  double mu_c = 0.0;
  double deviation = 0.0;   // mu'_c - mu_c, or the class-env shift delta
  int shots = 5;
  int query_per_class = 15;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  SweepVar sweep = SweepVar::Deviation;
  std::vector<double> grid;
  bool tie_alpha_beta = false;  // sweeping beta with alpha = beta (Figure-3 style)
  std::vector<Scheme> schemes = {Scheme::Gp, Scheme::PacohFullTarget,
                                 Scheme::PacohPartialTarget, Scheme::Wfem};
  Approx approx = Approx::Map;
  int particles = 10;
  int test_tasks = 20;
  TrainConfig train;
  ModelConfig model;
  std::string out_path;
  bool timings = false;  // opt-in wall-time column (non-deterministic bytes)
  std::optional<std::string> meta_data_path;
};

struct ResultRow {
  Scheme scheme = Scheme::Gp;
  Approx approx = Approx::Map;
  double alpha = 0.0, beta = 0.0, deviation = 0.0;
  std::uint64_t seed = 0;
  std::string metric;  // rmse | mean_accuracy | error
  double value = 0.0;
  double wall_ms = 0.0;
  std::string message;  // populated on error rows

  bool is_error() const { return metric == "error"; }
};

/// MAP point (one entry) or SVGD particle ensemble.
struct HyperPosterior {
  std::vector<HyperParams> points;
};

/// Equally weighted average of the per-point posterior predictive means.
double predictive_mean_ensemble(const HyperPosterior& posterior,
                                const ModelConfig& model, const TaskDataset& data,
                                const Eigen::VectorXd& x);

/// Mixture mean and variance of the per-point Gaussian predictives.
GPPredictive predictive_mixture(const HyperPosterior& posterior,
                                const ModelConfig& model, const TaskDataset& data,
                                const Eigen::VectorXd& x);

double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels);
double mean_accuracy(const Eigen::VectorXd& predicted_labels,
                     const Eigen::VectorXd& labels);

/// Data for one sweep cell: the mixed meta-training set, the parallel
/// all-target set with matched per-task seeds, and the held-out test tasks.
struct CellData {
  MetaDataset mixed;
  MetaDataset all_target;
  std::vector<TestTask> test_tasks;
  double alpha = 0.5, beta = 0.5, deviation = 0.0;
};

CellData make_cell_data(const ExperimentConfig& cfg, double alpha, double beta,
                        double deviation, std::uint64_t seed);

/// Shared per-seed initialization: every scheme of one cell reuses it.
struct InitState {
  HyperParams theta0;
  ParticleEnsemble ensemble;
};

InitState make_init_state(const ExperimentConfig& cfg, ParamLayoutPtr layout,
                          std::uint64_t seed);

/// Trains one scheme on the cell and scores it on the test tasks.
ResultRow run_scheme(Scheme scheme, const CellData& cell, const InitState& init,
                     const ExperimentConfig& cfg, std::uint64_t seed);

/// Cartesian product (grid x schemes x seeds); rows are written to
/// cfg.out_path in deterministic (grid, scheme, seed) order regardless of
/// the number of worker threads (WFEM_GP_THREADS caps them). Returns the
/// number of error rows.
int sweep(const ExperimentConfig& cfg);

/// Figure-2 style export: per grid x, the ground truth and each scheme's
/// posterior mean/std on one held-out task.
void export_posterior_curve(const ExperimentConfig& cfg,
                            const std::vector<double>& x_grid,
                            const std::string& out_path);

/// Shortest round-trip decimal formatting (stable across runs).
std::string format_double(double v);

}  // namespace wfem

#endif  // WFEM_HARNESS_HPP_
