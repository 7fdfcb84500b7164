// accent/gmm.hpp
//
// Diagonal-covariance Gaussian mixtures: density evaluation, EM training and
// log-likelihood scoring. Feature matrices are frames x dims throughout.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace accent {

class Rng;

struct GmmModel {
  Eigen::VectorXd weights;    // N
  Eigen::MatrixXd means;      // N x M
  Eigen::MatrixXd variances;  // N x M, diagonal of each covariance

  Eigen::Index n_components() const { return weights.size(); }
  Eigen::Index dims() const { return means.cols(); }

  /// Throws DataError when shapes disagree or the parameters leave the
  /// probability simplex / positive orthant.
  void validate() const;

  bool operator==(const GmmModel&) const = default;
};

struct EmOptions {
  int max_iters = 50;
  double rel_tol = 1e-5;
  double variance_floor_factor = 1e-3;  // times the global per-dim variance
  std::uint64_t seed = 0;
  int kmeans_iters = 10;

  void validate() const;
};

struct EmResult {
  GmmModel model;
  double initial_log_likelihood = 0.0;
  /// Total log-likelihood of the model after each EM iteration.
  std::vector<double> trace;
  Eigen::RowVectorXd variance_floor;
  int rescued_components = 0;
};

/// log N(x; mu, diag(var)).
template <typename DX, typename DM, typename DV>
typename DX::Scalar gaussian_log_density(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DM>& mean,
                                         const Eigen::MatrixBase<DV>& var) {
  using Scalar = typename DX::Scalar;
  const auto m = static_cast<Scalar>(x.size());
  const Scalar log_2pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  const Scalar quad = ((x.derived().array() - mean.derived().array()).square() / var.derived().array()).sum();
  return Scalar(-0.5) * (m * log_2pi + var.derived().array().log().sum() + quad);
}

/// K x N matrix of log(w_i) + log b_i(x_k).
Eigen::MatrixXd component_log_joint(const GmmModel& model, const Eigen::MatrixXd& x);

/// Per-frame log p(x_k | model), log-sum-exp over components.
Eigen::VectorXd frame_log_likelihoods(const GmmModel& model, const Eigen::MatrixXd& x);

/// Sum over frames of log p(x_k | model).
double mixture_log_likelihood(const GmmModel& model, const Eigen::MatrixXd& x);

/// Posterior responsibility of each component for one frame.
Eigen::VectorXd component_posteriors(const GmmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Seeded k-means++ initialisation followed by EM.
EmResult em_fit(const Eigen::MatrixXd& x, Eigen::Index n_components, const EmOptions& opts);

/// Draw frames from the mixture.
Eigen::MatrixXd sample_gmm(const GmmModel& model, Eigen::Index count, Rng& rng);

/// ACGMM1 format: "ACGMM1 <N> <M>\n" then weights, means (row-major) and
/// variances (row-major) as binary64 little-endian.
std::string serialize_gmm(const GmmModel& model);
GmmModel deserialize_gmm(const std::string& bytes);
void write_gmm(const std::filesystem::path& path, const GmmModel& model);
GmmModel read_gmm(const std::filesystem::path& path);

}  // namespace accent
