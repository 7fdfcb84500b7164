// accent/discriminant.hpp
//
// LDA and heteroscedastic LDA (maximum-likelihood) projections.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "accent/features.hpp"

namespace accent {

/// Rows of `x` with a class id in [0, num_classes) per row.
struct LabeledFeatures {
  Eigen::MatrixXd x;
  std::vector<int> labels;
  int num_classes = 0;

  std::vector<Eigen::Index> class_counts() const;
  /// Every class needs at least two rows.
  void validate() const;
};

struct ScatterMatrices {
  Eigen::MatrixXd between;  // total scatter about the global mean, divided by K
  Eigen::MatrixXd within;   // per-class scatter summed, divided by S
};

ScatterMatrices scatter_matrices(const LabeledFeatures& data);

enum class TransformKind { Lda, Hlda };

/// LDA stores m x M; HLDA stores the full square M x M transform and
/// projects with its first `retained` rows.
struct LinearTransform {
  TransformKind kind = TransformKind::Lda;
  Eigen::MatrixXd matrix;
  Eigen::Index retained = 0;

  Eigen::Index input_dims() const { return matrix.cols(); }
  auto projection() const { return matrix.topRows(retained); }
  bool operator==(const LinearTransform&) const = default;
};

struct LdaResult {
  LinearTransform transform;
  Eigen::VectorXd eigenvalues;  // all M, descending
  Eigen::MatrixXd basis;        // all M eigenvectors as rows, same order
  bool regularized = false;
};

/// Generalised eigenvectors of (S_B, S_W) by descending eigenvalue, each
/// scaled so that w' S_W w = 1 and signed so its first non-zero entry is
/// positive.
LdaResult lda_fit(const LabeledFeatures& data, Eigen::Index target_dims);

struct HldaOptions {
  int max_iters = 100;
  double rel_tol = 1e-6;
};

struct HldaResult {
  LinearTransform transform;
  double initial_objective = 0.0;
  std::vector<double> trace;  // objective after each accepted sweep
  bool regularized = false;
  bool restarted = false;
};

/// Per-class and total covariance statistics the HLDA objective is built on.
struct HldaStats {
  std::vector<Eigen::MatrixXd> class_cov;
  std::vector<double> class_count;
  Eigen::MatrixXd total_cov;
  double count = 0.0;
  bool regularized = false;
};

HldaStats hlda_stats(const LabeledFeatures& data);

/// Log-likelihood (up to a constant) of the data under transform A with the
/// first `retained` rows class-specific and the rest shared.
double hlda_objective(const Eigen::MatrixXd& a, Eigen::Index retained, const HldaStats& stats);

HldaResult hlda_fit(const LabeledFeatures& data, Eigen::Index retained, const HldaOptions& opts = {});

Eigen::MatrixXd project(const LinearTransform& t, const Eigen::MatrixXd& x);
FeatureMatrix project(const LinearTransform& t, const FeatureMatrix& f);

/// Principal angles (radians, descending) between the row spaces of a and b.
Eigen::VectorXd principal_angles(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// ACHLDA1 format: "ACHLDA1 <LDA|HLDA> <M> <m>\n" then the stored rows,
/// row-major binary64 little-endian.
std::string serialize_transform(const LinearTransform& t);
LinearTransform deserialize_transform(const std::string& bytes);
void write_transform(const std::filesystem::path& path, const LinearTransform& t);
LinearTransform read_transform(const std::filesystem::path& path);

}  // namespace accent
