// src/discriminant.cpp

#include "accent/discriminant.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "accent/binary_io.hpp"
#include "accent/error.hpp"

namespace accent {

namespace {

constexpr double kRidge = 1e-6;

template <typename Row>
void fix_sign(Row&& v) {
  const double scale = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12 * scale) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

// Adds ridge * trace / M to the diagonal when the matrix is numerically
// singular. Returns true when the ridge was applied.
bool regularize(Eigen::MatrixXd& m, double reference_trace) {
  const Eigen::Index dims = m.rows();
  const double ridge = kRidge * reference_trace / static_cast<double>(dims);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo > ridge && lo > 1e-12 * hi) return false;
  m.diagonal().array() += std::max(ridge, std::numeric_limits<double>::min());
  return true;
}

struct HldaRun {
  Eigen::MatrixXd a;
  double initial = 0.0;
  std::vector<double> trace;
  bool ok = false;
};

std::optional<double> log_abs_det(const Eigen::MatrixXd& a) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::MatrixXd& packed = lu.matrixLU();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double d = std::abs(packed(i, i));
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    acc += std::log(d);
  }
  return acc;
}

double objective_or_neg_inf(const Eigen::MatrixXd& a, Eigen::Index retained, const HldaStats& stats) {
  const auto ld = log_abs_det(a);
  if (!ld) return -std::numeric_limits<double>::infinity();
  return hlda_objective(a, retained, stats);
}

HldaRun run_hlda(Eigen::MatrixXd a, Eigen::Index retained, const HldaStats& stats, const HldaOptions& opts) {
  HldaRun run;
  const Eigen::Index dims = a.rows();
  const double k = stats.count;
  Eigen::LDLT<Eigen::MatrixXd> total_solver(stats.total_cov);

  double obj = objective_or_neg_inf(a, retained, stats);
  if (!std::isfinite(obj)) return run;
  run.initial = obj;

  for (int it = 0; it < opts.max_iters; ++it) {
    Eigen::MatrixXd next = a;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(next);
    if (!lu.isInvertible()) return run;
    Eigen::MatrixXd inv = lu.inverse();
    bool failed = false;
    for (Eigen::Index j = 0; j < dims && !failed; ++j) {
      // Row j of the cofactor matrix, up to the factor det(A).
      const Eigen::VectorXd c = inv.col(j);
      const Eigen::VectorXd aj = next.row(j).transpose();
      Eigen::VectorXd g_inv_c;
      if (j < retained) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dims, dims);
        for (std::size_t s = 0; s < stats.class_cov.size(); ++s) {
          const double q = aj.dot(stats.class_cov[s] * aj);
          g += (stats.class_count[s] / q) * stats.class_cov[s];
        }
        g_inv_c = g.ldlt().solve(c);
      } else {
        const double q = aj.dot(stats.total_cov * aj);
        g_inv_c = (q / k) * total_solver.solve(c);
      }
      const double denom = c.dot(g_inv_c);
      if (!(denom > 0.0) || !std::isfinite(denom)) {
        failed = true;
        break;
      }
      const Eigen::VectorXd new_row = g_inv_c * std::sqrt(k / denom);
      // Sherman-Morrison update of the inverse for the replaced row.
      const Eigen::RowVectorXd delta = (new_row - aj).transpose();
      const double scale = 1.0 + delta.dot(inv.col(j));
      if (std::abs(scale) < 1e-14) {
        failed = true;
        break;
      }
      const Eigen::RowVectorXd w = delta * inv;
      inv -= (inv.col(j) * w) / scale;
      next.row(j) = new_row.transpose();
    }
    if (failed) return run;
    const double next_obj = objective_or_neg_inf(next, retained, stats);
    if (!std::isfinite(next_obj)) return run;
    if (next_obj < obj) break;  // round-off only; keep the last accepted transform
    const double gain = (next_obj - obj) / std::abs(obj);
    a = std::move(next);
    obj = next_obj;
    run.trace.push_back(obj);
    if (gain < opts.rel_tol) break;
  }
  run.a = std::move(a);
  run.ok = true;
  return run;
}

}  // namespace

std::vector<Eigen::Index> LabeledFeatures::class_counts() const {
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(num_classes), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

void LabeledFeatures::validate() const {
  if (num_classes < 1) throw DataError("labeled features: no classes");
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw DataError("labeled features: label count mismatch");
  for (int l : labels) {
    if (l < 0 || l >= num_classes) throw DataError("labeled features: label out of range");
  }
  const auto counts = class_counts();
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (counts[s] < 2) throw DataError("labeled features: class " + std::to_string(s) + " has fewer than two rows");
  }
}

ScatterMatrices scatter_matrices(const LabeledFeatures& data) {
  data.validate();
  const Eigen::Index dims = data.x.cols();
  const auto k = static_cast<double>(data.x.rows());
  const Eigen::RowVectorXd global = data.x.colwise().mean();
  const Eigen::MatrixXd centred = data.x.rowwise() - global;

  ScatterMatrices out;
  out.between = centred.transpose() * centred / k;

  const auto counts = data.class_counts();
  Eigen::MatrixXd class_means = Eigen::MatrixXd::Zero(data.num_classes, dims);
  for (Eigen::Index r = 0; r < data.x.rows(); ++r) class_means.row(data.labels[static_cast<std::size_t>(r)]) += data.x.row(r);
  for (int s = 0; s < data.num_classes; ++s) class_means.row(s) /= static_cast<double>(counts[static_cast<std::size_t>(s)]);
  Eigen::MatrixXd within_centred(data.x.rows(), dims);
  for (Eigen::Index r = 0; r < data.x.rows(); ++r) {
    within_centred.row(r) = data.x.row(r) - class_means.row(data.labels[static_cast<std::size_t>(r)]);
  }
  out.within = within_centred.transpose() * within_centred / static_cast<double>(data.num_classes);
  // Exact symmetry for downstream self-adjoint solvers.
  out.between = 0.5 * (out.between + out.between.transpose()).eval();
  out.within = 0.5 * (out.within + out.within.transpose()).eval();
  return out;
}

LdaResult lda_fit(const LabeledFeatures& data, Eigen::Index target_dims) {
  const Eigen::Index dims = data.x.cols();
  if (target_dims < 1 || target_dims > dims) throw UsageError("lda: target dims must be in [1, M]");
  ScatterMatrices sc = scatter_matrices(data);
  LdaResult res;
  res.regularized = regularize(sc.within, sc.within.trace() > 0.0 ? sc.within.trace() : sc.between.trace());

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sc.between, sc.within);
  if (ges.info() != Eigen::Success) throw DataError("lda: generalized eigensolver failed");
  // Ascending from the solver; reverse to descending with a stable tie order.
  res.eigenvalues = ges.eigenvalues().reverse();
  res.basis = ges.eigenvectors().rowwise().reverse().transpose();
  for (Eigen::Index i = 0; i < dims; ++i) fix_sign(res.basis.row(i));
  res.transform.kind = TransformKind::Lda;
  res.transform.matrix = res.basis.topRows(target_dims);
  res.transform.retained = target_dims;
  return res;
}

HldaStats hlda_stats(const LabeledFeatures& data) {
  data.validate();
  const Eigen::Index dims = data.x.cols();
  HldaStats st;
  st.count = static_cast<double>(data.x.rows());
  const Eigen::RowVectorXd global = data.x.colwise().mean();
  const Eigen::MatrixXd centred = data.x.rowwise() - global;
  st.total_cov = centred.transpose() * centred / st.count;

  const auto counts = data.class_counts();
  for (int s = 0; s < data.num_classes; ++s) {
    Eigen::MatrixXd rows(counts[static_cast<std::size_t>(s)], dims);
    Eigen::Index n = 0;
    for (Eigen::Index r = 0; r < data.x.rows(); ++r) {
      if (data.labels[static_cast<std::size_t>(r)] == s) rows.row(n++) = data.x.row(r);
    }
    const Eigen::MatrixXd c = rows.rowwise() - rows.colwise().mean();
    st.class_cov.push_back(c.transpose() * c / static_cast<double>(n));
    st.class_count.push_back(static_cast<double>(n));
  }
  const double ref = st.total_cov.trace();
  st.regularized = regularize(st.total_cov, ref);
  for (auto& c : st.class_cov) st.regularized = regularize(c, ref) || st.regularized;
  return st;
}

double hlda_objective(const Eigen::MatrixXd& a, Eigen::Index retained, const HldaStats& stats) {
  const auto ld = log_abs_det(a);
  if (!ld) return -std::numeric_limits<double>::infinity();
  double obj = stats.count * *ld;
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    const Eigen::RowVectorXd aj = a.row(j);
    if (j < retained) {
      for (std::size_t s = 0; s < stats.class_cov.size(); ++s) {
        obj -= 0.5 * stats.class_count[s] * std::log(aj.dot(aj * stats.class_cov[s]));
      }
    } else {
      obj -= 0.5 * stats.count * std::log(aj.dot(aj * stats.total_cov));
    }
  }
  return obj;
}

HldaResult hlda_fit(const LabeledFeatures& data, Eigen::Index retained, const HldaOptions& opts) {
  const Eigen::Index dims = data.x.cols();
  if (retained < 1 || retained >= dims) throw UsageError("hlda: retained dims must be in [1, M)");
  if (opts.max_iters < 1 || !(opts.rel_tol > 0.0)) throw UsageError("hlda: bad options");
  const HldaStats stats = hlda_stats(data);
  const LdaResult lda = lda_fit(data, dims);

  // The LDA basis in eigenvalue order can sit at a local optimum when the
  // classes differ mainly in variance, so a second start orders the same
  // basis by each direction's own likelihood gain.
  std::vector<Eigen::Index> by_gain(static_cast<std::size_t>(dims));
  std::iota(by_gain.begin(), by_gain.end(), 0);
  Eigen::VectorXd gain(dims);
  for (Eigen::Index i = 0; i < dims; ++i) {
    const Eigen::RowVectorXd v = lda.basis.row(i);
    double g = stats.count * std::log(v.dot(v * stats.total_cov));
    for (std::size_t s = 0; s < stats.class_cov.size(); ++s) {
      g -= stats.class_count[s] * std::log(v.dot(v * stats.class_cov[s]));
    }
    gain[i] = g;
  }
  std::stable_sort(by_gain.begin(), by_gain.end(), [&](Eigen::Index x, Eigen::Index y) { return gain[x] > gain[y]; });
  Eigen::MatrixXd reordered(dims, dims);
  for (Eigen::Index i = 0; i < dims; ++i) reordered.row(i) = lda.basis.row(by_gain[static_cast<std::size_t>(i)]);

  HldaResult res;
  res.regularized = stats.regularized || lda.regularized;
  std::optional<HldaRun> best;
  for (const Eigen::MatrixXd* start : std::array<const Eigen::MatrixXd*, 2>{&lda.basis, &reordered}) {
    if (start == &reordered && reordered == lda.basis) break;
    HldaRun run = run_hlda(*start, retained, stats, opts);
    if (!run.ok) {
      res.restarted = true;
      run = run_hlda(Eigen::MatrixXd::Identity(dims, dims), retained, stats, opts);
      if (!run.ok) throw DataError("hlda: transform became singular after restart from identity");
    }
    const double final_obj = run.trace.empty() ? run.initial : run.trace.back();
    const double best_obj = best ? (best->trace.empty() ? best->initial : best->trace.back())
                                 : -std::numeric_limits<double>::infinity();
    if (!best || final_obj > best_obj) best = std::move(run);
  }

  Eigen::MatrixXd a = best->a;
  for (Eigen::Index i = 0; i < dims; ++i) fix_sign(a.row(i));
  res.transform.kind = TransformKind::Hlda;
  res.transform.matrix = std::move(a);
  res.transform.retained = retained;
  res.initial_objective = best->initial;
  res.trace = std::move(best->trace);
  return res;
}

Eigen::MatrixXd project(const LinearTransform& t, const Eigen::MatrixXd& x) {
  if (x.cols() != t.input_dims()) {
    throw DataError("project: input dims " + std::to_string(x.cols()) + " != transform dims " +
                    std::to_string(t.input_dims()));
  }
  return x * t.projection().transpose();
}

FeatureMatrix project(const LinearTransform& t, const FeatureMatrix& f) {
  return f.with_values(project(t, f.values));
}

Eigen::VectorXd principal_angles(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(a.transpose()).householderQ() *
                             Eigen::MatrixXd::Identity(a.cols(), a.rows());
  const Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(b.transpose()).householderQ() *
                             Eigen::MatrixXd::Identity(b.cols(), b.rows());
  // Sines from the residual of b after projecting onto a: accurate for small angles.
  const Eigen::MatrixXd resid = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(resid);
  Eigen::VectorXd s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = std::asin(std::min(1.0, s[i]));
  return s;
}

std::string serialize_transform(const LinearTransform& t) {
  std::ostringstream os;
  os << "ACHLDA1 " << (t.kind == TransformKind::Lda ? "LDA" : "HLDA") << ' ' << t.input_dims() << ' ' << t.retained
     << '\n';
  io::write_matrix_rows(os, t.matrix);
  return os.str();
}

LinearTransform deserialize_transform(const std::string& bytes) {
  std::istringstream is(bytes);
  std::string line;
  std::getline(is, line);
  const auto tok = io::split_ws(line);
  if (tok.size() != 4 || tok[0] != "ACHLDA1" || (tok[1] != "LDA" && tok[1] != "HLDA")) {
    throw DataError("ACHLDA1: bad header");
  }
  const auto m_in = io::parse_int(tok[2]);
  const auto m_out = io::parse_int(tok[3]);
  if (!m_in || !m_out || *m_out < 1 || *m_out > *m_in) throw DataError("ACHLDA1: bad dimensions");
  LinearTransform t;
  t.kind = tok[1] == "LDA" ? TransformKind::Lda : TransformKind::Hlda;
  t.retained = *m_out;
  t.matrix = io::read_matrix_rows(is, t.kind == TransformKind::Lda ? *m_out : *m_in, *m_in);
  if (is.peek() != std::char_traits<char>::eof()) throw DataError("ACHLDA1: trailing bytes");
  return t;
}

void write_transform(const std::filesystem::path& path, const LinearTransform& t) {
  io::write_file(path, serialize_transform(t));
}

LinearTransform read_transform(const std::filesystem::path& path) {
  return deserialize_transform(io::read_file(path));
}

}  // namespace accent
