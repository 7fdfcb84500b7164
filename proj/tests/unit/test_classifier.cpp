// tests/unit/test_classifier.cpp

#include <doctest.h>

#include <cmath>

#include "accent/binary_io.hpp"
#include "accent/classifier.hpp"
#include "accent/corpus.hpp"
#include "accent/error.hpp"
#include "support.hpp"

using namespace accent;
using accent::testing::random_gmm;
using accent::testing::random_matrix;
using accent::testing::ScratchDir;

namespace {

using ModelGrid = std::vector<std::vector<std::optional<GmmModel>>>;

GmmModel unit_gaussian(Eigen::RowVectorXd mean) {
  GmmModel g;
  g.weights = Eigen::VectorXd::Ones(1);
  g.variances = Eigen::MatrixXd::Ones(1, mean.size());
  g.means = std::move(mean);
  return g;
}

// Two accents over the full inventory. Only vowel `informative` differs
// between them; every other vowel shares one distribution.
ModelGrid one_informative_vowel(int informative, Eigen::Index dims) {
  ModelGrid grid(2, std::vector<std::optional<GmmModel>>(15));
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 15; ++t) {
      Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(dims);
      if (t == informative) mu[0] = s == 0 ? -1.5 : 1.5;
      grid[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)] = unit_gaussian(mu);
    }
  }
  return grid;
}

std::vector<DevUtterance> dev_from(const ModelGrid& grid, int per_accent, int frames, Rng& rng) {
  std::vector<DevUtterance> dev;
  for (int s = 0; s < 2; ++s) {
    for (int u = 0; u < per_accent; ++u) {
      DevUtterance d;
      d.label = s;
      for (int t = 0; t < 15; ++t) d.per_vowel.push_back(sample_gmm(*grid[s][t], frames, rng));
      dev.push_back(std::move(d));
    }
  }
  return dev;
}

VowelModelSet vowel_set(const ModelGrid& grid, std::vector<int> subset, std::vector<double> weights) {
  VowelModelSet v;
  v.accents = {"a", "b"};
  v.inventory = vowel_inventory();
  v.models = grid;
  v.subset = std::move(subset);
  v.weights = std::move(weights);
  return v;
}

}  // namespace

TEST_CASE("argmax ties go to the lowest index") {
  CHECK(argmax_lowest({1.0, 3.0, 3.0}) == 1);
  CHECK(argmax_lowest({-2.0}) == 0);
  CHECK_THROWS_AS(argmax_lowest({}), UsageError);
}

TEST_CASE("train_baseline runs one seeded fit per accent") {
  Rng rng(1);
  const Eigen::MatrixXd x = random_matrix(rng, 200, 3);
  EmOptions opts;
  opts.seed = 4;
  const AccentModelSet one = train_baseline({"a"}, {x}, 2, opts);
  CHECK(one.models.at(0) == em_fit(x, 2, opts).model);

  Eigen::MatrixXd far = random_matrix(rng, 300, 2);
  Eigen::MatrixXd near = random_matrix(rng, 300, 2);
  far.array() += 20.0;
  const AccentModelSet two = train_baseline({"a", "b"}, {near, far}, 1, opts);
  const double sep = (two.models[0].means.row(0) - two.models[1].means.row(0)).norm();
  CHECK(sep > 5.0 * std::sqrt(two.models[0].variances.maxCoeff()));
  CHECK_THROWS_AS(train_baseline({"a"}, {random_matrix(rng, 3, 2)}, 4, opts), DataError);
}

TEST_CASE("many components on high-dimensional data stay floored and populated") {
  Rng rng(2);
  const GmmModel truth = random_gmm(rng, 16, 117);
  const Eigen::MatrixXd x = sample_gmm(truth, 3000, rng);
  EmOptions opts;
  opts.max_iters = 5;
  const EmResult r = em_fit(x, 256, opts);
  for (Eigen::Index i = 0; i < 256; ++i) {
    CHECK((r.model.variances.row(i).array() >= r.variance_floor.array()).all());
  }
  CHECK((r.model.weights.array() > 0.0).all());
}

TEST_CASE("baseline classification") {
  Rng rng(3);
  AccentModelSet set;
  set.accents = {"a", "b"};
  set.models = {unit_gaussian(Eigen::RowVectorXd::Constant(2, -2.0)), unit_gaussian(Eigen::RowVectorXd::Constant(2, 2.0))};
  int correct = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int truth = trial % 2;
    const Eigen::MatrixXd x = sample_gmm(set.models[static_cast<std::size_t>(truth)], 20, rng);
    const auto r = classify_baseline(set, x);
    correct += r.predicted == truth && r.scores[static_cast<std::size_t>(truth)] > r.scores[static_cast<std::size_t>(1 - truth)];
  }
  CHECK(correct >= 99);

  AccentModelSet same = set;
  same.models[1] = same.models[0];
  CHECK(classify_baseline(same, random_matrix(rng, 5, 2)).predicted == 0);

  AccentModelSet single;
  single.accents = {"only"};
  single.models = {set.models[0]};
  CHECK(classify_baseline(single, random_matrix(rng, 5, 2, 10.0)).predicted == 0);
  CHECK_THROWS_AS(classify_baseline(set, Eigen::MatrixXd(0, 2)), DataError);
}

TEST_CASE("baseline scores are additive, double with duplication and follow label permutation") {
  Rng rng(4);
  AccentModelSet set;
  set.accents = {"a", "b", "c"};
  for (int s = 0; s < 3; ++s) set.models.push_back(random_gmm(rng, 3, 4));
  const Eigen::MatrixXd x1 = random_matrix(rng, 7, 4), x2 = random_matrix(rng, 9, 4);
  Eigen::MatrixXd both(16, 4);
  both << x1, x2;
  const auto a = classify_baseline(set, x1), b = classify_baseline(set, x2), ab = classify_baseline(set, both);
  for (int s = 0; s < 3; ++s) CHECK(std::abs(ab.scores[s] - a.scores[s] - b.scores[s]) < 1e-9);

  Eigen::MatrixXd dup(14, 4);
  dup << x1, x1;
  const auto d = classify_baseline(set, dup);
  for (int s = 0; s < 3; ++s) CHECK(d.scores[s] == doctest::Approx(2.0 * a.scores[s]).epsilon(1e-14));
  CHECK(d.predicted == a.predicted);

  AccentModelSet perm = set;
  perm.models = {set.models[2], set.models[0], set.models[1]};
  const auto p = classify_baseline(perm, x1);
  CHECK(p.scores[0] == a.scores[2]);
  CHECK(p.scores[1] == a.scores[0]);
  CHECK(p.scores[2] == a.scores[1]);
  const int mapped[] = {1, 2, 0};
  CHECK(p.predicted == mapped[a.predicted]);
}

TEST_CASE("vowel weights") {
  std::vector<double> counts(15, 0.0);
  counts[0] = 300.0;
  counts[10] = 100.0;
  CHECK(vowel_weights(counts, {0}) == std::vector<double>{1.0});
  CHECK(vowel_weights(counts, {0, 10}) == std::vector<double>{0.75, 0.25});
  const auto equal = vowel_weights(std::vector<double>(15, 5.0), {0, 2, 4, 6, 8, 10, 12});
  for (double w : equal) CHECK(w == doctest::Approx(1.0 / 7.0));
  CHECK_THROWS_AS(vowel_weights(counts, {1, 2}), DataError);
}

TEST_CASE("one vowel with unit weight reduces to the baseline decision") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    ModelGrid grid(3, std::vector<std::optional<GmmModel>>(15));
    AccentModelSet base;
    base.accents = {"a", "b", "c"};
    const int t = static_cast<int>(rng.index(15));
    for (int s = 0; s < 3; ++s) {
      base.models.push_back(random_gmm(rng, 2, 3));
      grid[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)] = base.models.back();
    }
    VowelModelSet v = vowel_set(grid, {t}, {1.0});
    v.accents = base.accents;
    std::vector<Eigen::MatrixXd> per(15, Eigen::MatrixXd(0, 3));
    per[static_cast<std::size_t>(t)] = random_matrix(rng, 1 + static_cast<Eigen::Index>(rng.index(30)), 3, 2.0);
    CHECK(classify_vowel(v, per).predicted == classify_baseline(base, per[static_cast<std::size_t>(t)]).predicted);
  }
}

TEST_CASE("the informative vowel decides and dominates the margin") {
  Rng rng(6);
  const int aa = 0, iy = 10;
  const ModelGrid grid = one_informative_vowel(aa, 2);
  const VowelModelSet v = vowel_set(grid, {aa, iy}, {0.5, 0.5});
  for (int truth = 0; truth < 2; ++truth) {
    std::vector<Eigen::MatrixXd> per(15, Eigen::MatrixXd(0, 2));
    per[aa] = sample_gmm(*grid[truth][aa], 40, rng);
    per[iy] = sample_gmm(*grid[truth][iy], 40, rng);
    const auto r = classify_vowel(v, per);
    CHECK(r.predicted == truth);
    const VowelScoreTable table = score_vowels(grid, per, {aa, iy});
    const double aa_margin = std::abs(table.log_likelihood(0, aa) - table.log_likelihood(1, aa));
    const double iy_margin = std::abs(table.log_likelihood(0, iy) - table.log_likelihood(1, iy));
    CHECK(aa_margin > iy_margin);
  }
}

TEST_CASE("missing subset vowels are renormalised away") {
  Rng rng(7);
  const ModelGrid grid = one_informative_vowel(3, 2);
  const std::vector<int> subset = {0, 1, 2, 3, 4, 5, 6};
  const VowelModelSet v = vowel_set(grid, subset, std::vector<double>(7, 1.0 / 7.0));
  std::vector<Eigen::MatrixXd> per(15, Eigen::MatrixXd(0, 2));
  for (int t : {0, 3, 5, 6}) per[static_cast<std::size_t>(t)] = sample_gmm(*grid[0][t], 10, rng);
  const auto r = classify_vowel(v, per);
  const VowelScoreTable table = score_vowels(grid, per, subset);
  for (int s = 0; s < 2; ++s) {
    double want = 0.0;
    for (int t : {0, 3, 5, 6}) want += 0.25 * table.log_likelihood(s, t) / 10.0;
    CHECK(r.scores[static_cast<std::size_t>(s)] == doctest::Approx(want).epsilon(1e-12));
  }

  VowelModelSet literal = v;
  literal.normalize_by_frames = false;
  const auto raw = classify_vowel(literal, per);
  CHECK(raw.scores[0] == doctest::Approx(10.0 * r.scores[0]).epsilon(1e-12));

  std::vector<Eigen::MatrixXd> none(15, Eigen::MatrixXd(0, 2));
  CHECK_THROWS_AS(classify_vowel(v, none), DataError);
  none[9] = random_matrix(rng, 3, 2);
  CHECK_THROWS_AS(classify_vowel(v, none), UsageError);
}

TEST_CASE("greedy subset selection") {
  Rng rng(8);
  const ModelGrid grid = one_informative_vowel(7, 2);
  const std::vector<double> counts(15, 100.0);
  const auto dev = dev_from(grid, 10, 20, rng);
  const SubsetSelection one = select_vowel_subset(dev, grid, counts, 1, true);
  REQUIRE(one.order.size() == 1);
  CHECK(one.order[0] == 7);
  CHECK(one.accuracy[0] == doctest::Approx(1.0));

  const SubsetSelection all = select_vowel_subset(dev, grid, counts, 15, true);
  std::vector<int> sorted = all.order;
  std::sort(sorted.begin(), sorted.end());
  for (int t = 0; t < 15; ++t) CHECK(sorted[static_cast<std::size_t>(t)] == t);
  // After the informative vowel every candidate ties; inventory order breaks them.
  CHECK(all.order[1] == 0);
  CHECK(all.order[2] == 1);

  const ModelGrid flat = one_informative_vowel(-1, 2);
  const SubsetSelection tie = select_vowel_subset(dev_from(flat, 4, 10, rng), flat, counts, 1, true);
  CHECK(tie.order[0] == 0);

  auto with_empty = dev;
  with_empty.push_back(DevUtterance{0, std::vector<Eigen::MatrixXd>(15, Eigen::MatrixXd(0, 2))});
  CHECK(select_vowel_subset(with_empty, grid, counts, 1, true).skipped_utterances == 1);
}

TEST_CASE("model sets round trip through their manifests") {
  ScratchDir dir("classifier");
  Rng rng(9);
  AccentModelSet base;
  base.accents = {"a", "b"};
  base.models = {random_gmm(rng, 2, 3), random_gmm(rng, 2, 3)};
  base.fingerprint = "f00d";
  base.context = 1;
  base.transform = LinearTransform{TransformKind::Hlda, random_matrix(rng, 9, 9), 3};
  write_model_set(dir / "base", base);
  CHECK(read_model_set_kind(dir / "base") == ModelSetKind::Baseline);
  const AccentModelSet b2 = read_accent_model_set(dir / "base");
  CHECK(b2.accents == base.accents);
  CHECK(b2.models == base.models);
  CHECK(b2.context == 1);
  CHECK(b2.transform == base.transform);
  const std::string manifest = io::read_file(dir / "base" / kModelSetManifest);
  write_model_set(dir / "base2", b2);
  CHECK(io::read_file(dir / "base2" / kModelSetManifest) == manifest);

  const ModelGrid grid = one_informative_vowel(2, 3);
  VowelModelSet v = vowel_set(grid, {2, 5}, {0.25, 0.75});
  v.confidence_threshold = -3.5;
  v.fingerprint = "beef";
  write_model_set(dir / "vowel", v);
  CHECK(read_model_set_kind(dir / "vowel") == ModelSetKind::Vowel);
  const VowelModelSet v2 = read_vowel_model_set(dir / "vowel");
  CHECK(v2.subset == v.subset);
  CHECK(v2.weights == v.weights);
  CHECK(v2.confidence_threshold == -3.5);
  CHECK(*v2.models[1][5] == *v.models[1][5]);
  write_model_set(dir / "vowel2", v2);
  CHECK(io::read_file(dir / "vowel2" / kModelSetManifest) == io::read_file(dir / "vowel" / kModelSetManifest));

  // A tampered model file fails its checksum.
  for (const auto& e : std::filesystem::directory_iterator(dir / "base")) {
    if (e.path().extension() == ".acgmm") {
      std::string bytes = io::read_file(e.path());
      bytes.back() ^= 1;
      io::write_file(e.path(), bytes);
      break;
    }
  }
  CHECK_THROWS_AS(read_accent_model_set(dir / "base"), ConsistencyError);
}
