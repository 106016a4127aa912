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

#ifndef WFEM_INFERENCE_HPP_
#define WFEM_INFERENCE_HPP_

#include <functional>
#include <optional>

#include "wfem/adam.hpp"
#include "wfem/meta.hpp"

namespace wfem {

struct MapConfig {
  int iterations = 2000;
  int batch_tasks = 5;  // meta-batch size n
  AdamConfig adam;
  std::uint64_t seed = 0;
};

struct SvgdConfig {
  int particles = 10;   // K
  double step_size = 1e-3;  // epsilon
  std::optional<double> length_scale;  // fixed l; empty -> median heuristic
  int iterations = 2000;
  int batch_tasks = 5;
  std::uint64_t seed = 0;
};

struct ParticleEnsemble {
  std::vector<HyperParams> particles;
  long iteration = 0;

  int size() const { return static_cast<int>(particles.size()); }
};

HyperParams draw_hyper_prior(ParamLayoutPtr layout, double hyper_prior_variance,
                             Rng& rng);
ParticleEnsemble draw_ensemble(ParamLayoutPtr layout, double hyper_prior_variance,
                               int particles, Rng& rng);

/// Squared-exponential SVGD kernel exp(-||a - b||^2 / (2 l)).
double svgd_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double l);

/// One Stein transport step. Scores align with particles; the kernel length
/// scale comes from cfg or, when unset, the median heuristic over pairwise
/// particle distances.
ParticleEnsemble svgd_step(const ParticleEnsemble& ensemble,
                           const std::vector<Eigen::VectorXd>& scores,
                           const SvgdConfig& cfg);

/// Score field: theta, iteration index -> estimated grad log density.
/// Implementations may cache their mini-batch per iteration index; svgd_fit
/// evaluates all particles at the same index before stepping.
using ScoreField = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;

/// Adam ascent on a score field (used directly by tests with surrogate
/// targets; map_fit wires in the meta-objective).
Eigen::VectorXd map_fit_core(const ScoreField& score, Eigen::VectorXd theta,
                             const MapConfig& cfg);

ParticleEnsemble svgd_fit_core(const ScoreField& score, ParticleEnsemble init,
                               const SvgdConfig& cfg);

/// MAP approximation of the Gibbs hyper-posterior: Adam on
/// gamma * Lbar(theta) + ||theta||^2 / (2 sigma_P^2) over stratified
/// meta-batches of cfg.batch_tasks tasks.
HyperParams map_fit(const MetaDataset& meta, const ModelConfig& model,
                    const MetaConfig& meta_cfg, const MapConfig& cfg,
                    const HyperParams& init);

/// SVGD approximation; particles start from the hyper-prior (or the given
/// ensemble) and move along kernel-weighted scores plus the repulsion term.
ParticleEnsemble svgd_fit(const MetaDataset& meta, const ModelConfig& model,
                          const MetaConfig& meta_cfg, const SvgdConfig& cfg,
                          std::optional<ParticleEnsemble> init = {});

}  // namespace wfem

#endif  // WFEM_INFERENCE_HPP_
