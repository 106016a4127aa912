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

#include "wfem/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace wfem {

HyperParams draw_hyper_prior(ParamLayoutPtr layout, double hyper_prior_variance,
                             Rng& rng) {
  HyperParams p = zero_params(layout);
  const double stddev = std::sqrt(hyper_prior_variance);
  for (int i = 0; i < p.size(); ++i) p.values[i] = rng.normal(0.0, stddev);
  return p;
}

ParticleEnsemble draw_ensemble(ParamLayoutPtr layout, double hyper_prior_variance,
                               int particles, Rng& rng) {
  if (particles < 1) throw DomainError("draw_ensemble: need K >= 1");
  ParticleEnsemble ens;
  ens.particles.reserve(particles);
  for (int k = 0; k < particles; ++k) {
    ens.particles.push_back(draw_hyper_prior(layout, hyper_prior_variance, rng));
  }
  return ens;
}

double svgd_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double l) {
  if (a.size() != b.size()) {
    throw ShapeError("svgd_kernel: particle lengths disagree");
  }
  return std::exp(-(a - b).squaredNorm() / (2.0 * l));
}

namespace {

/// Median of pairwise squared distances, scaled so that a typical pair has
/// kernel weight about 1/(K+1). Falls back to 1 for degenerate ensembles.
double median_length_scale(const ParticleEnsemble& ens) {
  const int k = ens.size();
  if (k < 2) return 1.0;
  std::vector<double> sq;
  sq.reserve(static_cast<size_t>(k) * (k - 1) / 2);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      sq.push_back(
          (ens.particles[i].values - ens.particles[j].values).squaredNorm());
    }
  }
  const size_t mid = (sq.size() - 1) / 2;
  std::nth_element(sq.begin(), sq.begin() + mid, sq.end());
  const double median = sq[mid];
  if (median <= 0.0) return 1.0;
  return median / (2.0 * std::log(static_cast<double>(k) + 1.0));
}

}  // namespace

ParticleEnsemble svgd_step(const ParticleEnsemble& ensemble,
                           const std::vector<Eigen::VectorXd>& scores,
                           const SvgdConfig& cfg) {
  const int k = ensemble.size();
  if (static_cast<int>(scores.size()) != k) {
    throw ShapeError("svgd_step: scores do not align with particles");
  }
  const double l =
      cfg.length_scale ? *cfg.length_scale : median_length_scale(ensemble);

  ParticleEnsemble next = ensemble;
  for (int target = 0; target < k; ++target) {
    const Eigen::VectorXd& theta_k = ensemble.particles[target].values;
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(theta_k.size());
    for (int j = 0; j < k; ++j) {
      const Eigen::VectorXd& theta_j = ensemble.particles[j].values;
      const double w = svgd_kernel(theta_j, theta_k, l);
      phi += w * scores[j] + (theta_k - theta_j) * (w / l);
    }
    phi /= static_cast<double>(k);
    const Eigen::VectorXd delta = cfg.step_size * phi;
    if (!delta.allFinite()) {
      throw NumericError("svgd_step: non-finite update for particle", target);
    }
    next.particles[target].values = theta_k + delta;
  }
  next.iteration = ensemble.iteration + 1;
  return next;
}

Eigen::VectorXd map_fit_core(const ScoreField& score, Eigen::VectorXd theta,
                             const MapConfig& cfg) {
  AdamState adam = AdamState::make(static_cast<int>(theta.size()), cfg.adam);
  for (int it = 0; it < cfg.iterations; ++it) {
    try {
      const Eigen::VectorXd grad = -score(theta, it);
      adam_step(adam, theta, grad);
    } catch (const NumericError& err) {
      throw NumericError(
          "map_fit: aborted at iteration " + std::to_string(it) + ": " +
              err.what(),
          err.node_index());
    }
  }
  return theta;
}

ParticleEnsemble svgd_fit_core(const ScoreField& score, ParticleEnsemble init,
                               const SvgdConfig& cfg) {
  ParticleEnsemble ens = std::move(init);
  std::vector<Eigen::VectorXd> scores(ens.size());
  for (int it = 0; it < cfg.iterations; ++it) {
    try {
      for (int k = 0; k < ens.size(); ++k) {
        scores[k] = score(ens.particles[k].values, it);
      }
      ens = svgd_step(ens, scores, cfg);
    } catch (const NumericError& err) {
      throw NumericError(
          "svgd_fit: aborted at iteration " + std::to_string(it) + ": " +
              err.what(),
          err.node_index());
    }
  }
  return ens;
}

namespace {

/// Stratified mini-batch score provider; resamples once per iteration index
/// so all SVGD particles of one step share the batch.
class BatchScore {
 public:
  BatchScore(const MetaDataset& meta, const ModelConfig& model,
             const MetaConfig& cfg, ParamLayoutPtr layout, int batch_tasks,
             std::uint64_t seed)
      : meta_(&meta),
        model_(&model),
        cfg_(cfg),
        layout_(std::move(layout)),
        batch_tasks_(std::min(batch_tasks, meta.size())),
        rng_(mix_seed(seed, stream::kBatch)) {
    if (batch_tasks_ < 1) {
      throw DomainError("fit: meta-batch size must be >= 1");
    }
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& theta, int iteration) {
    if (iteration != cached_iteration_) {
      batch_ = sample_meta_batch(*meta_, batch_tasks_, rng_);
      cached_iteration_ = iteration;
    }
    const HyperParams params{theta, layout_};
    return score_estimate(params, *model_, batch_, cfg_).grad;
  }

 private:
  const MetaDataset* meta_;
  const ModelConfig* model_;
  MetaConfig cfg_;
  ParamLayoutPtr layout_;
  int batch_tasks_;
  Rng rng_;
  MetaBatch batch_;
  int cached_iteration_ = -1;
};

}  // namespace

HyperParams map_fit(const MetaDataset& meta, const ModelConfig& model,
                    const MetaConfig& meta_cfg, const MapConfig& cfg,
                    const HyperParams& init) {
  BatchScore score(meta, model, meta_cfg, init.layout, cfg.batch_tasks,
                   cfg.seed);
  HyperParams out = init;
  out.values = map_fit_core(std::ref(score), init.values, cfg);
  return out;
}

ParticleEnsemble svgd_fit(const MetaDataset& meta, const ModelConfig& model,
                          const MetaConfig& meta_cfg, const SvgdConfig& cfg,
                          std::optional<ParticleEnsemble> init) {
  ParamLayoutPtr layout = model.make_layout();
  ParticleEnsemble start;
  if (init) {
    start = std::move(*init);
  } else {
    Rng rng(mix_seed(cfg.seed, stream::kInit));
    start = draw_ensemble(layout, meta_cfg.hyper_prior_variance, cfg.particles,
                          rng);
  }
  if (!start.particles.empty()) layout = start.particles.front().layout;
  BatchScore score(meta, model, meta_cfg, layout, cfg.batch_tasks, cfg.seed);
  return svgd_fit_core(std::ref(score), std::move(start), cfg);
}

}  // namespace wfem
