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

#include "wfem/gp_classify.hpp"

#include <cmath>
#include <utility>

#include "wfem/rng.hpp"

namespace wfem {

namespace {

// Keeps sqrt(W) differentiable and W^-1 finite when the sigmoid saturates.
constexpr double kCurvatureFloor = 1e-12;
constexpr double kInverseCurvatureFloor = 1e-10;

/// sigma(t) and sigma(-t) from one shared base value, so that flipping the
/// latent sign swaps the pair bitwise. laplace_newton relies on this for the
/// exact label-flip antisymmetry of the mode.
struct SigmoidPair {
  double pos;  // sigma(t)
  double neg;  // sigma(-t) = 1 - sigma(t)
};

SigmoidPair sigmoid_pair(double t) {
  const double e = std::exp(-std::abs(t));
  const double lo = e / (1.0 + e);
  const double hi = 1.0 - lo;
  return t >= 0.0 ? SigmoidPair{hi, lo} : SigmoidPair{lo, hi};
}

void require_binary_labels(const Eigen::VectorXd& labels) {
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw DomainError("classification labels must be 0 or 1");
    }
  }
}

}  // namespace

double sigmoid(double x) { return sigmoid_pair(x).pos; }

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  return out;
}

LaplaceState laplace_newton(const Eigen::MatrixXd& kernel,
                            const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& labels,
                            const LaplaceConfig& cfg) {
  const Eigen::Index m = labels.size();
  if (m < 1) throw DomainError("laplace_newton: task is empty");
  if (kernel.rows() != m || kernel.cols() != m || mean.size() != m) {
    throw ShapeError("laplace_newton: kernel/mean/label sizes disagree");
  }
  require_binary_labels(labels);

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd g(m), w(m);

  LaplaceState state;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const SigmoidPair s = sigmoid_pair(u[i] + mean[i]);
      g[i] = labels[i] == 1.0 ? s.neg : -s.pos;  // y - sigma(t)
      w[i] = s.pos * s.neg + kCurvatureFloor;
    }
    const Eigen::VectorXd sw = w.cwiseSqrt();
    // B = I + sqrt(W) K sqrt(W); eigenvalues >= 1, so no jitter is needed.
    const Eigen::MatrixXd b_mat =
        identity + (sw * sw.transpose()).cwiseProduct(kernel);
    const Eigen::LLT<Eigen::MatrixXd> llt(b_mat);
    if (llt.info() != Eigen::Success) {
      throw IllConditionedError("laplace_newton: B factorization failed");
    }
    const Eigen::VectorXd b = w.cwiseProduct(u) + g;
    const Eigen::VectorXd kb = kernel * b;
    const Eigen::VectorXd a =
        b - sw.cwiseProduct(llt.solve(sw.cwiseProduct(kb)));
    u = kernel * a;
    state.iterations = it + 1;

    // Stationarity: grad log p(Y|t) - K^-1 u, with K^-1 u = a by construction.
    double residual = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const SigmoidPair s = sigmoid_pair(u[i] + mean[i]);
      const double gi = labels[i] == 1.0 ? s.neg : -s.pos;
      residual = std::max(residual, std::abs(gi - a[i]));
    }
    if (residual < cfg.tolerance) {
      state.converged = true;
      break;
    }
  }

  state.mode = std::move(u);
  state.w.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const SigmoidPair s = sigmoid_pair(state.mode[i] + mean[i]);
    state.w[i] = s.pos * s.neg + kCurvatureFloor;
  }
  return state;
}

LaplaceState laplace_mode(const HyperParams& params, const ModelConfig& model,
                          const TaskDataset& data, const LaplaceConfig& cfg) {
  const Eigen::MatrixXd kernel = kernel_matrix(params, model, data.x);
  const Eigen::VectorXd mean =
      mlp_forward_batch(params, Block::MeanNet, data.x).col(0);
  return laplace_newton(kernel, mean, data.y, cfg);
}

namespace {

struct ClassifyCache {
  Eigen::VectorXd grad;             // y - sigma(t-hat)
  Eigen::LLT<Eigen::MatrixXd> llt;  // of K + W^-1 (+ jitter)
  Eigen::MatrixXd phi;              // training features
  Eigen::VectorXd mean;             // training prior means
};

ClassifyCache make_classify_cache(const HyperParams& params,
                                  const ModelConfig& model,
                                  const TaskDataset& data,
                                  const LaplaceState& state) {
  if (!state.converged) {
    throw DomainError("latent_predict: Laplace state did not converge");
  }
  ClassifyCache cache;
  cache.mean = mlp_forward_batch(params, Block::MeanNet, data.x).col(0);
  cache.grad.resize(data.size());
  for (int i = 0; i < data.size(); ++i) {
    const SigmoidPair s = sigmoid_pair(state.mode[i] + cache.mean[i]);
    cache.grad[i] = data.y[i] == 1.0 ? s.neg : -s.pos;
  }
  Eigen::MatrixXd cov = kernel_matrix(params, model, data.x);
  cov.diagonal() +=
      state.w.cwiseMax(kInverseCurvatureFloor).cwiseInverse();
  cache.llt = cholesky_with_jitter(std::move(cov));
  cache.phi = mlp_forward_batch(params, Block::FeatureNet, data.x);
  return cache;
}

GPPredictive classify_predict_one(const ClassifyCache& cache,
                                  const HyperParams& params,
                                  const Eigen::VectorXd& x) {
  const Eigen::VectorXd fx = mlp_forward(params, Block::FeatureNet, x);
  const Eigen::VectorXd kvec =
      (0.5 *
       (-(cache.phi.rowwise() - fx.transpose()).rowwise().squaredNorm().array())
           .exp())
          .matrix();
  GPPredictive out;
  out.mean = mlp_forward(params, Block::MeanNet, x)(0) + kvec.dot(cache.grad);
  const Eigen::VectorXd v = cache.llt.matrixL().solve(kvec);
  out.variance = std::max(0.0, 0.5 - v.squaredNorm());
  return out;
}

}  // namespace

GPPredictive latent_predict(const HyperParams& params, const ModelConfig& model,
                            const TaskDataset& data, const LaplaceState& state,
                            const Eigen::VectorXd& x) {
  return classify_predict_one(make_classify_cache(params, model, data, state),
                              params, x);
}

std::vector<GPPredictive> latent_predict_batch(const HyperParams& params,
                                               const ModelConfig& model,
                                               const TaskDataset& data,
                                               const LaplaceState& state,
                                               const Eigen::MatrixXd& queries) {
  const ClassifyCache cache = make_classify_cache(params, model, data, state);
  std::vector<GPPredictive> out;
  out.reserve(queries.rows());
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    out.push_back(classify_predict_one(cache, params, queries.row(i).transpose()));
  }
  return out;
}

double class_probability_from_moments(const GPPredictive& latent, int samples,
                                      std::uint64_t seed) {
  if (samples < 1) throw DomainError("class_probability: samples must be >= 1");
  Rng rng(seed);
  const double stddev = std::sqrt(std::max(0.0, latent.variance));
  double acc = 0.0;
  for (int r = 0; r < samples; ++r) {
    acc += sigmoid(latent.mean + stddev * rng.normal());
  }
  return acc / samples;
}

double class_probability(const HyperParams& params, const ModelConfig& model,
                         const TaskDataset& data, const LaplaceState& state,
                         const Eigen::VectorXd& x,
                         const ClassPredictConfig& cfg) {
  const GPPredictive latent = latent_predict(params, model, data, state, x);
  return class_probability_from_moments(latent, cfg.samples, cfg.seed);
}

ad::Var class_evidence_on_tape(ad::Tape& tape, const HyperParams& params,
                               const ModelConfig& model, const TaskDataset& data,
                               const LaplaceConfig& cfg, bool* converged) {
  const int m = data.size();
  if (m < 1) throw DomainError("class_evidence_on_tape: task is empty");
  require_binary_labels(data.y);

  ad::Var phi = ad::tape_mlp_forward(tape, params, Block::FeatureNet, data.x);
  ad::Var mean = ad::tape_mlp_forward(tape, params, Block::MeanNet, data.x);
  ad::Var kernel = tape.scale(tape.exp(tape.neg(tape.pairwise_sqdist(phi))), 0.5);

  ad::Var labels = tape.constant(data.y);
  ad::Var identity = tape.constant(Eigen::MatrixXd::Identity(m, m));
  ad::Var u = tape.constant(Eigen::MatrixXd::Zero(m, 1));

  // Newton recursion with a fixed unroll count, recorded end to end;
  // u_next = K a with a = b - sqrt(W) B^-1 sqrt(W) K b and b = W u + grad.
  ad::Var a{};
  for (int it = 0; it < cfg.unroll; ++it) {
    ad::Var t = tape.add(u, mean);
    ad::Var sig = tape.sigmoid(t);
    ad::Var grad = tape.sub(labels, sig);
    ad::Var w = tape.add_const(
        tape.cmul(sig, tape.add_const(tape.neg(sig), 1.0)), kCurvatureFloor);
    ad::Var sw = tape.sqrt(w);
    ad::Var b_mat = tape.add(
        identity, tape.cmul(tape.matmul(sw, tape.transpose(sw)), kernel));
    ad::Var chol = tape.cholesky(b_mat);
    ad::Var b = tape.add(tape.cmul(w, u), grad);
    ad::Var kb = tape.matmul(kernel, b);
    ad::Var z = tape.solve_lower(chol, tape.cmul(sw, kb));
    ad::Var z2 = tape.solve_lower_t(chol, z);
    a = tape.sub(b, tape.cmul(sw, z2));
    u = tape.matmul(kernel, a);
  }

  ad::Var t_hat = tape.add(u, mean);
  ad::Var sig_hat = tape.sigmoid(t_hat);

  if (converged != nullptr) {
    const Eigen::VectorXd residual =
        (tape.value(labels) - tape.value(sig_hat) - tape.value(a)).col(0);
    *converged = residual.lpNorm<Eigen::Infinity>() < cfg.tolerance;
  }

  ad::Var w_hat = tape.add_const(
      tape.cmul(sig_hat, tape.add_const(tape.neg(sig_hat), 1.0)),
      kCurvatureFloor);
  ad::Var sw_hat = tape.sqrt(w_hat);
  ad::Var b_hat = tape.add(
      identity, tape.cmul(tape.matmul(sw_hat, tape.transpose(sw_hat)), kernel));
  ad::Var chol_hat = tape.cholesky(b_hat);

  // log p(Y|t-hat) = y^T t - sum softplus(t)
  ad::Var loglik = tape.sub(tape.dot(labels, t_hat), tape.sum(tape.softplus(t_hat)));
  // -1/2 u^T K^-1 u = -1/2 u^T a since u = K a from the last update.
  return tape.add(tape.add(tape.scale(tape.dot(u, a), -0.5), loglik),
                  tape.scale(tape.logdet_chol(chol_hat), -0.5));
}

double approx_log_marginal(const HyperParams& params, const ModelConfig& model,
                           const TaskDataset& data, const LaplaceConfig& cfg) {
  ad::Tape tape;
  return tape.scalar(class_evidence_on_tape(tape, params, model, data, cfg));
}

}  // namespace wfem
