// tests/unit/test_discriminant.cpp

#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "accent/error.hpp"
#include "accent/discriminant.hpp"
#include "support.hpp"

using namespace accent;
using accent::testing::brute_scatter;
using accent::testing::max_abs_diff;
using accent::testing::random_labeled;
using accent::testing::random_matrix;

TEST_CASE("scatter matrices match the double loop") {
  LabeledFeatures hand;
  hand.num_classes = 2;
  hand.x.resize(6, 2);
  hand.x << 0, 0, 1, 0, 0, 1, 4, 4, 5, 4, 4, 6;
  hand.labels = {0, 0, 0, 1, 1, 1};
  const ScatterMatrices s = scatter_matrices(hand);
  const ScatterMatrices b = brute_scatter(hand);
  CHECK(max_abs_diff(s.between, b.between) < 1e-12);
  CHECK(max_abs_diff(s.within, b.within) < 1e-12);

  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const int classes = 1 + static_cast<int>(rng.index(4));
    const auto m = static_cast<Eigen::Index>(1 + rng.index(6));
    const auto k = static_cast<Eigen::Index>(2 * classes + rng.index(60 - 2 * classes + 1));
    const LabeledFeatures d = random_labeled(rng, k, m, classes);
    const ScatterMatrices got = scatter_matrices(d);
    const ScatterMatrices want = brute_scatter(d);
    CHECK(max_abs_diff(got.between, want.between) < 1e-12);
    CHECK(max_abs_diff(got.within, want.within) < 1e-12);
    CHECK(got.between == got.between.transpose());
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(got.within).eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("degenerate scatter cases") {
  LabeledFeatures same;
  same.num_classes = 2;
  same.x = Eigen::MatrixXd::Constant(4, 3, 1.5);
  same.labels = {0, 1, 0, 1};
  const ScatterMatrices z = scatter_matrices(same);
  CHECK(z.between.isZero(0.0));
  CHECK(z.within.isZero(0.0));

  Rng rng(2);
  LabeledFeatures one = random_labeled(rng, 20, 3, 1);
  const ScatterMatrices s = scatter_matrices(one);
  // One class: both sums are the same scatter, normalised by K and by 1.
  CHECK(max_abs_diff(20.0 * s.between, s.within) < 1e-12);

  LabeledFeatures thin = random_labeled(rng, 5, 2, 3);
  CHECK_THROWS_AS(scatter_matrices(thin), DataError);
}

TEST_CASE("LDA eigenpairs match a dense solve of inv(S_W) S_B") {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const LabeledFeatures d = random_labeled(rng, 90, 4, 3);
    const LdaResult lda = lda_fit(d, 4);
    const ScatterMatrices s = scatter_matrices(d);
    Eigen::EigenSolver<Eigen::MatrixXd> es(s.within.inverse() * s.between);
    Eigen::VectorXd ev = es.eigenvalues().real();
    std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
    CHECK(max_abs_diff(lda.eigenvalues, ev) < 1e-8);
    for (int r = 0; r < 4; ++r) {
      const Eigen::VectorXd w = lda.basis.row(r).transpose();
      CHECK(w.dot(s.within * w) == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(max_abs_diff(s.between * w, lda.eigenvalues[r] * (s.within * w)) < 1e-8);
      Eigen::Index first = 0;
      while (std::abs(w[first]) == 0.0) ++first;
      CHECK(w[first] > 0.0);
    }
  }
}

TEST_CASE("LDA picks the separating axis") {
  Rng rng(4);
  LabeledFeatures d;
  d.num_classes = 2;
  d.x.resize(2000, 2);
  for (int k = 0; k < 2000; ++k) {
    const int s = k % 2;
    d.labels.push_back(s);
    d.x(k, 0) = (s ? 1.0 : -1.0) + rng.normal();
    d.x(k, 1) = rng.normal();
  }
  const LdaResult lda = lda_fit(d, 1);
  const Eigen::RowVectorXd w = lda.transform.matrix.row(0).normalized();
  CHECK(std::abs(w[0]) > 0.99);
}

TEST_CASE("total scatter and classical between-class scatter share eigenvectors") {
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    const LabeledFeatures d = random_labeled(rng, 120, 5, 4);
    const ScatterMatrices s = scatter_matrices(d);
    Eigen::MatrixXd classic = Eigen::MatrixXd::Zero(5, 5);
    const Eigen::RowVectorXd phi = d.x.colwise().mean();
    for (int c = 0; c < 4; ++c) {
      Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(5);
      double n = 0;
      for (Eigen::Index r = 0; r < d.x.rows(); ++r) {
        if (d.labels[r] == c) {
          mu += d.x.row(r);
          n += 1;
        }
      }
      mu /= n;
      classic += n * (mu - phi).transpose() * (mu - phi);
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(classic, s.within);
    const Eigen::MatrixXd top = ges.eigenvectors().rightCols(3).transpose();
    const LdaResult lda = lda_fit(d, 3);
    CHECK(principal_angles(lda.transform.matrix, top).maxCoeff() < 1e-6);
  }
}

TEST_CASE("LDA subspace is invariant to translation and label recoding") {
  Rng rng(6);
  LabeledFeatures d = random_labeled(rng, 150, 4, 3);
  const LdaResult base = lda_fit(d, 2);
  LabeledFeatures moved = d;
  moved.x.rowwise() += Eigen::RowVectorXd::Constant(4, 7.5);
  for (int& l : moved.labels) l = 2 - l;
  CHECK(principal_angles(lda_fit(moved, 2).transform.matrix, base.transform.matrix).maxCoeff() < 1e-8);
}

TEST_CASE("singular within-class scatter is regularised") {
  Rng rng(7);
  LabeledFeatures d = random_labeled(rng, 40, 3, 2);
  d.x.col(2) = d.x.col(0);
  const LdaResult lda = lda_fit(d, 2);
  CHECK(lda.regularized);
  CHECK(lda.transform.matrix.allFinite());
  CHECK_THROWS_AS(lda_fit(d, 4), UsageError);
}

TEST_CASE("HLDA objective is monotone") {
  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    const LabeledFeatures d = random_labeled(rng, 300, 5, 3);
    const HldaResult h = hlda_fit(d, 2);
    double prev = h.initial_objective;
    for (double v : h.trace) {
      CHECK(v - prev >= -1e-8);
      prev = v;
    }
    const HldaStats st = hlda_stats(d);
    CHECK(hlda_objective(h.transform.matrix, 2, st) == doctest::Approx(prev).epsilon(1e-9));
    CHECK(h.transform.matrix.rows() == 5);
    CHECK(h.transform.projection().rows() == 2);
  }
}

TEST_CASE("HLDA agrees with LDA on homoscedastic classes") {
  Rng rng(9);
  for (int i = 0; i < 3; ++i) {
    const LabeledFeatures d = accent::testing::homoscedastic_classes(rng, 3, 400, 4);
    const LdaResult lda = lda_fit(d, 2);
    const HldaResult h = hlda_fit(d, 2);
    CHECK(principal_angles(h.transform.projection(), lda.transform.matrix).maxCoeff() < 1e-3);
  }
}

TEST_CASE("heteroscedastic pair: LDA takes the mean axis, HLDA the variance axis") {
  const LabeledFeatures d = accent::testing::heteroscedastic_pair(1);
  const Eigen::RowVectorXd l = lda_fit(d, 1).transform.matrix.row(0).normalized();
  const Eigen::RowVectorXd h = hlda_fit(d, 1).transform.projection().row(0).normalized();
  CHECK(std::abs(l[0]) > 0.9);
  CHECK(std::abs(h[1]) > 0.9);
}

TEST_CASE("projection") {
  Rng rng(10);
  const Eigen::MatrixXd x = random_matrix(rng, 6, 117);
  LinearTransform id{TransformKind::Lda, Eigen::MatrixXd::Identity(117, 117), 117};
  CHECK(project(id, x) == x);
  LinearTransform first{TransformKind::Lda, Eigen::MatrixXd::Identity(1, 117), 1};
  CHECK(project(first, x).col(0) == x.col(0));
  LinearTransform hl{TransformKind::Hlda, random_matrix(rng, 117, 117), 20};
  CHECK(project(hl, x).cols() == 20);
  CHECK_THROWS_AS(project(hl, random_matrix(rng, 2, 39)), DataError);
}

TEST_CASE("principal angles") {
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 1, 0;
  b << 1, 1;
  CHECK(principal_angles(a, b)[0] == doctest::Approx(std::numbers::pi / 4));
  Rng rng(11);
  const Eigen::MatrixXd m = random_matrix(rng, 3, 6);
  const Eigen::MatrixXd mixed = random_matrix(rng, 3, 3) * m;
  CHECK(principal_angles(m, mixed).maxCoeff() < 1e-7);
}

TEST_CASE("ACHLDA1 round trip is bit exact") {
  Rng rng(12);
  for (const LinearTransform& t : {LinearTransform{TransformKind::Lda, random_matrix(rng, 20, 117), 20},
                                   LinearTransform{TransformKind::Hlda, random_matrix(rng, 117, 117), 20}}) {
    const std::string bytes = serialize_transform(t);
    const LinearTransform back = deserialize_transform(bytes);
    CHECK(back == t);
    CHECK(serialize_transform(back) == bytes);
    CHECK_THROWS_AS(deserialize_transform(bytes.substr(0, bytes.size() - 8)), DataError);
  }
  CHECK_THROWS_AS(deserialize_transform("ACHLDA1 PCA 2 1\n"), DataError);
}
