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

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wfem/harness.hpp"

namespace {

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<std::uint64_t> parse_csv_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  return out;
}

std::vector<double> parse_range(const std::string& text) {
  // min:max:step
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
  if (parts.size() != 3 || parts[2] <= 0.0) {
    throw CLI::ValidationError("--x-grid", "expected min:max:step with step > 0");
  }
  std::vector<double> grid;
  for (double x = parts[0]; x <= parts[1] + 1e-12; x += parts[2]) {
    grid.push_back(x);
  }
  return grid;
}

struct CommonFlags {
  std::string sweep = "deviation";
  std::string grid_text;
  std::string schemes_text = "gp,pacoh_full_target,pacoh_partial_target,wfem";
  std::string approx = "map";
  std::string seeds_text = "1,2,3,4,5";
  std::string meta_data;
  double svgd_length_scale = 0.0;  // 0 -> median heuristic
  std::vector<int> hidden;
  int feature_dim = 2;
};

void add_common_options(CLI::App* cmd, wfem::ExperimentConfig& cfg,
                        CommonFlags& flags) {
  cmd->add_option("--sweep", flags.sweep, "sweep variable: deviation|beta|alpha")
      ->check(CLI::IsMember({"deviation", "beta", "alpha"}));
  cmd->add_option("--grid", flags.grid_text, "comma-separated sweep grid");
  cmd->add_option("--alpha", cfg.alpha, "source-loss weight in [0,1]");
  cmd->add_option("--beta", cfg.beta, "source task fraction in [0,1]");
  cmd->add_option("--n-tasks", cfg.n_tasks, "meta-training tasks N");
  cmd->add_option("--samples", cfg.samples_per_task, "samples per task M");
  cmd->add_option("--schemes", flags.schemes_text, "comma-separated scheme list");
  cmd->add_option("--approx", flags.approx, "posterior approximation")
      ->check(CLI::IsMember({"map", "svgd"}));
  cmd->add_option("--particles", cfg.particles, "SVGD particle count K");
  cmd->add_option("--seeds", flags.seeds_text, "comma-separated seeds");
  cmd->add_option("--out", cfg.out_path, "output CSV path")->required();
  cmd->add_option("--meta-data", flags.meta_data,
                  "meta-dataset file replacing generated tasks");
  cmd->add_option("--test-tasks", cfg.test_tasks, "held-out tasks per cell");
  cmd->add_flag("--tie-alpha-beta", cfg.tie_alpha_beta,
                "when sweeping beta, set alpha = beta");
  cmd->add_flag("--timings", cfg.timings, "append a wall_ms column");
  cmd->add_option("--iters", cfg.train.iterations, "optimizer iterations");
  cmd->add_option("--batch-tasks", cfg.train.batch_tasks, "meta-batch size n");
  cmd->add_option("--lr", cfg.train.learning_rate, "Adam step size");
  cmd->add_option("--svgd-step", cfg.train.svgd_step_size, "SVGD step size");
  cmd->add_option("--svgd-l", flags.svgd_length_scale,
                  "SVGD kernel length scale (0 = median heuristic)");
  cmd->add_option("--sigma-p", cfg.train.hyper_prior_variance,
                  "hyper-prior variance sigma_P^2");
  cmd->add_option("--class-samples", cfg.train.class_prob_samples,
                  "MC draws per class probability");
  cmd->add_option("--hidden", flags.hidden, "hidden layer widths");
  cmd->add_option("--feature-dim", flags.feature_dim,
                  "feature net output dimension");
}

int finalize_config(wfem::ExperimentConfig& cfg, CommonFlags& flags) {
  if (flags.sweep == "deviation") {
    cfg.sweep = wfem::SweepVar::Deviation;
  } else if (flags.sweep == "beta") {
    cfg.sweep = wfem::SweepVar::Beta;
  } else {
    cfg.sweep = wfem::SweepVar::Alpha;
  }
  if (!flags.grid_text.empty()) cfg.grid = parse_csv_doubles(flags.grid_text);
  cfg.seeds = parse_csv_seeds(flags.seeds_text);
  cfg.approx = flags.approx == "map" ? wfem::Approx::Map : wfem::Approx::Svgd;
  if (!flags.meta_data.empty()) cfg.meta_data_path = flags.meta_data;
  if (flags.svgd_length_scale > 0.0) {
    cfg.train.svgd_length_scale = flags.svgd_length_scale;
  }

  cfg.schemes.clear();
  std::stringstream ss(flags.schemes_text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto scheme = wfem::parse_scheme(item);
    if (!scheme) {
      std::cerr << "unknown scheme '" << item << "'\n";
      return 2;
    }
    cfg.schemes.push_back(*scheme);
  }
  if (cfg.schemes.empty()) {
    std::cerr << "no schemes selected\n";
    return 2;
  }

  const int input_dim = cfg.problem == wfem::Problem::Regression ? 1 : 2;
  cfg.model.mean_net.input_dim = input_dim;
  cfg.model.feature_net.input_dim = input_dim;
  cfg.model.feature_net.output_dim = flags.feature_dim;
  if (!flags.hidden.empty()) {
    cfg.model.mean_net.hidden = flags.hidden;
    cfg.model.feature_net.hidden = flags.hidden;
  }
  cfg.model.noise_variance = cfg.sigma * cfg.sigma;
  return 0;
}

int run_sweep(wfem::ExperimentConfig& cfg) {
  const int errors = wfem::sweep(cfg);
  if (errors > 0) {
    std::cerr << errors << " error row(s); see " << cfg.out_path << "\n";
    return 1;
  }
  std::cout << "wrote " << cfg.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned GP priors under meta-environment shift"};
  app.require_subcommand(1);

  wfem::ExperimentConfig reg_cfg;
  CommonFlags reg_flags;
  reg_flags.grid_text = "0,0.25,0.5,0.75,1.0,1.25";
  CLI::App* reg = app.add_subcommand("regression", "sinusoid regression sweeps");
  add_common_options(reg, reg_cfg, reg_flags);
  reg->add_option("--sigma", reg_cfg.sigma, "observation noise std");
  reg->add_option("--mu-c", reg_cfg.mu_c, "source environment mean of c");

  wfem::ExperimentConfig cls_cfg;
  cls_cfg.problem = wfem::Problem::Classification;
  cls_cfg.n_tasks = 20;
  cls_cfg.deviation = 0.3;
  CommonFlags cls_flags;
  cls_flags.sweep = "alpha";
  cls_flags.grid_text = "0,0.25,0.5,0.75,1";
  CLI::App* cls =
      app.add_subcommand("classification", "synthetic 2-way classification sweeps");
  add_common_options(cls, cls_cfg, cls_flags);
  cls->add_option("--shift", cls_cfg.deviation,
                  "target environment rotation delta");
  cls->add_option("--shots", cls_cfg.shots, "training shots per class");

  wfem::ExperimentConfig curve_cfg;
  curve_cfg.alpha = 0.2;
  curve_cfg.beta = 0.2;
  curve_cfg.deviation = 0.5;
  curve_cfg.seeds = {1};
  CommonFlags curve_flags;
  std::string x_grid_text = "-5:5:0.1";
  CLI::App* curve =
      app.add_subcommand("curve", "posterior prediction curves on one task");
  add_common_options(curve, curve_cfg, curve_flags);
  curve->add_option("--sigma", curve_cfg.sigma, "observation noise std");
  curve->add_option("--mu-c", curve_cfg.mu_c, "source environment mean of c");
  curve->add_option("--x-grid", x_grid_text, "query grid min:max:step");
  curve->add_option("--deviation", curve_cfg.deviation,
                    "target environment deviation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (reg->parsed()) {
      if (int rc = finalize_config(reg_cfg, reg_flags); rc != 0) return rc;
      return run_sweep(reg_cfg);
    }
    if (cls->parsed()) {
      if (int rc = finalize_config(cls_cfg, cls_flags); rc != 0) return rc;
      return run_sweep(cls_cfg);
    }
    if (curve->parsed()) {
      if (int rc = finalize_config(curve_cfg, curve_flags); rc != 0) return rc;
      wfem::export_posterior_curve(curve_cfg, parse_range(x_grid_text),
                                   curve_cfg.out_path);
      std::cout << "wrote " << curve_cfg.out_path << "\n";
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
