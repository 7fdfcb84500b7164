// src/gmm.cpp

#include "accent/gmm.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "accent/binary_io.hpp"
#include "accent/error.hpp"
#include "accent/rng.hpp"

namespace accent {

namespace {

constexpr double kMinVariance = 1e-10;
// Components whose total responsibility falls below this are re-seeded.
constexpr double kEmptyComponent = 1e-10;

Eigen::VectorXd row_log_sum_exp(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.rows());
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    const double mx = m.row(k).maxCoeff();
    if (!std::isfinite(mx)) {
      out[k] = mx;
      continue;
    }
    out[k] = mx + std::log((m.row(k).array() - mx).exp().sum());
  }
  return out;
}

struct Responsibilities {
  Eigen::MatrixXd gamma;       // K x N
  Eigen::VectorXd frame_ll;    // K
  double total = 0.0;
};

Responsibilities expectation(const GmmModel& model, const Eigen::MatrixXd& x) {
  Responsibilities r;
  Eigen::MatrixXd lj = component_log_joint(model, x);
  r.frame_ll = row_log_sum_exp(lj);
  r.total = r.frame_ll.sum();
  r.gamma = (lj.colwise() - r.frame_ll).array().exp();
  return r;
}

// Nearest centre per row, ties to the lowest index.
std::vector<Eigen::Index> assign(const Eigen::MatrixXd& x, const Eigen::VectorXd& x_sq, const Eigen::MatrixXd& centres) {
  const Eigen::MatrixXd d = (-2.0 * x * centres.transpose()).colwise() + x_sq;
  const Eigen::RowVectorXd c_sq = centres.rowwise().squaredNorm().transpose();
  std::vector<Eigen::Index> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centres.rows(); ++c) {
      const double v = d(k, c) + c_sq[c];
      if (v < best_d) {
        best_d = v;
        best = c;
      }
    }
    out[static_cast<std::size_t>(k)] = best;
  }
  return out;
}

Eigen::MatrixXd kmeans_pp_seed(const Eigen::MatrixXd& x, Eigen::Index n, Rng& rng) {
  const Eigen::Index k_max = x.rows();
  Eigen::MatrixXd centres(n, x.cols());
  centres.row(0) = x.row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(k_max))));
  Eigen::VectorXd d2 = (x.rowwise() - centres.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < n; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = k_max - 1;
      for (Eigen::Index k = 0; k < k_max; ++k) {
        acc += d2[k];
        if (u < acc && d2[k] > 0.0) {
          pick = k;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(k_max)));
    }
    centres.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - centres.row(c)).rowwise().squaredNorm());
  }
  return centres;
}

}  // namespace

void GmmModel::validate() const {
  const Eigen::Index n = weights.size();
  if (n == 0) throw DataError("gmm: no components");
  if (means.rows() != n || variances.rows() != n || variances.cols() != means.cols()) {
    throw DataError("gmm: inconsistent parameter shapes");
  }
  if (!weights.allFinite() || !means.allFinite() || !variances.allFinite()) throw DataError("gmm: non-finite parameter");
  if ((weights.array() < 0.0).any()) throw DataError("gmm: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-10) throw DataError("gmm: weights do not sum to one");
  if ((variances.array() <= 0.0).any()) throw DataError("gmm: non-positive variance");
}

void EmOptions::validate() const {
  if (max_iters < 1) throw UsageError("em: max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw UsageError("em: rel_tol must be > 0");
  if (!(variance_floor_factor > 0.0)) throw UsageError("em: variance_floor_factor must be > 0");
  if (kmeans_iters < 0) throw UsageError("em: kmeans_iters must be >= 0");
}

Eigen::MatrixXd component_log_joint(const GmmModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.dims()) {
    throw DataError("gmm: feature dims " + std::to_string(x.cols()) + " != model dims " +
                    std::to_string(model.dims()));
  }
  const double m = static_cast<double>(model.dims());
  const Eigen::MatrixXd inv_var = model.variances.cwiseInverse();
  const Eigen::MatrixXd mean_scaled = model.means.cwiseProduct(inv_var);
  Eigen::RowVectorXd constant(model.n_components());
  for (Eigen::Index i = 0; i < model.n_components(); ++i) {
    constant[i] = std::log(model.weights[i]) -
                  0.5 * (m * std::log(2.0 * std::numbers::pi) + model.variances.row(i).array().log().sum() +
                         model.means.row(i).dot(mean_scaled.row(i)));
  }
  Eigen::MatrixXd out = x * mean_scaled.transpose();
  out.noalias() -= 0.5 * x.cwiseAbs2() * inv_var.transpose();
  out.rowwise() += constant;
  return out;
}

Eigen::VectorXd frame_log_likelihoods(const GmmModel& model, const Eigen::MatrixXd& x) {
  return row_log_sum_exp(component_log_joint(model, x));
}

double mixture_log_likelihood(const GmmModel& model, const Eigen::MatrixXd& x) {
  return frame_log_likelihoods(model, x).sum();
}

Eigen::VectorXd component_posteriors(const GmmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.dims()) throw DataError("gmm: dimension mismatch");
  Eigen::VectorXd lj(model.n_components());
  for (Eigen::Index i = 0; i < model.n_components(); ++i) {
    lj[i] = std::log(model.weights[i]) +
            gaussian_log_density(x, model.means.row(i).transpose(), model.variances.row(i).transpose());
  }
  const double mx = lj.maxCoeff();
  Eigen::VectorXd p = (lj.array() - mx).exp();
  return p / p.sum();
}

EmResult em_fit(const Eigen::MatrixXd& x, Eigen::Index n_components, const EmOptions& opts) {
  opts.validate();
  const Eigen::Index k_max = x.rows();
  const Eigen::Index dims = x.cols();
  if (n_components < 1) throw UsageError("em: need at least one component");
  if (dims < 1) throw DataError("em: features have no dimensions");
  if (k_max < n_components) {
    throw DataError("em: " + std::to_string(k_max) + " frames cannot support " + std::to_string(n_components) +
                    " components");
  }

  const Eigen::RowVectorXd global_mean = x.colwise().mean();
  const Eigen::RowVectorXd global_var =
      ((x.rowwise() - global_mean).cwiseAbs2().colwise().sum() / static_cast<double>(k_max));
  EmResult res;
  res.variance_floor = (opts.variance_floor_factor * global_var).cwiseMax(kMinVariance);
  const Eigen::RowVectorXd& floor = res.variance_floor;

  // k-means++ seeding and Lloyd refinement.
  Rng rng(opts.seed);
  Eigen::MatrixXd centres = kmeans_pp_seed(x, n_components, rng);
  const Eigen::VectorXd x_sq = x.rowwise().squaredNorm();
  std::vector<Eigen::Index> labels = assign(x, x_sq, centres);
  for (int it = 0; it < opts.kmeans_iters; ++it) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_components, dims);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_components);
    for (Eigen::Index k = 0; k < k_max; ++k) {
      sums.row(labels[static_cast<std::size_t>(k)]) += x.row(k);
      counts[labels[static_cast<std::size_t>(k)]] += 1.0;
    }
    for (Eigen::Index c = 0; c < n_components; ++c) {
      if (counts[c] > 0.0) centres.row(c) = sums.row(c) / counts[c];
    }
    auto next = assign(x, x_sq, centres);
    if (next == labels) break;
    labels = std::move(next);
  }

  GmmModel& model = res.model;
  model.weights = Eigen::VectorXd::Zero(n_components);
  model.means = centres;
  model.variances = Eigen::MatrixXd::Zero(n_components, dims);
  {
    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(n_components, dims);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_components, dims);
    for (Eigen::Index k = 0; k < k_max; ++k) {
      const Eigen::Index c = labels[static_cast<std::size_t>(k)];
      model.weights[c] += 1.0;
      sums.row(c) += x.row(k);
      sq.row(c) += x.row(k).cwiseAbs2();
    }
    for (Eigen::Index c = 0; c < n_components; ++c) {
      if (model.weights[c] > 0.0) {
        model.means.row(c) = sums.row(c) / model.weights[c];
        model.variances.row(c) = sq.row(c) / model.weights[c] - model.means.row(c).cwiseAbs2();
      } else {
        // Only reachable with duplicated frames; treat as a one-frame cluster.
        model.weights[c] = 1.0;
        model.variances.row(c) = global_var;
      }
      model.variances.row(c) = model.variances.row(c).cwiseMax(floor);
    }
    model.weights /= model.weights.sum();
  }

  const Eigen::MatrixXd x2 = x.cwiseAbs2();
  Responsibilities r = expectation(model, x);
  res.initial_log_likelihood = r.total;
  double prev = r.total;
  for (int it = 0; it < opts.max_iters; ++it) {
    const Eigen::VectorXd occ = r.gamma.colwise().sum().transpose();
    const Eigen::MatrixXd first = r.gamma.transpose() * x;
    const Eigen::MatrixXd second = r.gamma.transpose() * x2;
    std::vector<Eigen::Index> empty;
    for (Eigen::Index i = 0; i < n_components; ++i) {
      if (occ[i] < kEmptyComponent) {
        empty.push_back(i);
        continue;
      }
      model.weights[i] = occ[i] / static_cast<double>(k_max);
      model.means.row(i) = first.row(i) / occ[i];
      model.variances.row(i) = (second.row(i) / occ[i] - model.means.row(i).cwiseAbs2()).cwiseMax(floor);
    }
    if (!empty.empty()) {
      // Re-seed at the worst-modelled frames, one distinct frame per component.
      std::vector<Eigen::Index> order(static_cast<std::size_t>(k_max));
      for (Eigen::Index k = 0; k < k_max; ++k) order[static_cast<std::size_t>(k)] = k;
      std::stable_sort(order.begin(), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return r.frame_ll[a] < r.frame_ll[b]; });
      for (std::size_t e = 0; e < empty.size(); ++e) {
        const Eigen::Index i = empty[e];
        model.means.row(i) = x.row(order[e % order.size()]);
        model.variances.row(i) = global_var.cwiseMax(floor);
        model.weights[i] = 1.0 / static_cast<double>(k_max);
        ++res.rescued_components;
      }
      model.weights /= model.weights.sum();
    }

    r = expectation(model, x);
    res.trace.push_back(r.total);
    const double gain = (r.total - prev) / std::abs(prev);
    prev = r.total;
    if (empty.empty() && !(gain >= opts.rel_tol)) break;
  }
  return res;
}

Eigen::MatrixXd sample_gmm(const GmmModel& model, Eigen::Index count, Rng& rng) {
  Eigen::MatrixXd out(count, model.dims());
  for (Eigen::Index k = 0; k < count; ++k) {
    const double u = rng.uniform();
    double acc = 0.0;
    Eigen::Index c = model.n_components() - 1;
    for (Eigen::Index i = 0; i < model.n_components(); ++i) {
      acc += model.weights[i];
      if (u < acc) {
        c = i;
        break;
      }
    }
    for (Eigen::Index d = 0; d < model.dims(); ++d) {
      out(k, d) = rng.normal(model.means(c, d), std::sqrt(model.variances(c, d)));
    }
  }
  return out;
}

std::string serialize_gmm(const GmmModel& model) {
  std::ostringstream os;
  os << "ACGMM1 " << model.n_components() << ' ' << model.dims() << '\n';
  io::write_f64_le(os, std::span<const double>(model.weights.data(), static_cast<std::size_t>(model.weights.size())));
  io::write_matrix_rows(os, model.means);
  io::write_matrix_rows(os, model.variances);
  return os.str();
}

GmmModel deserialize_gmm(const std::string& bytes) {
  std::istringstream is(bytes);
  std::string line;
  std::getline(is, line);
  const auto tok = io::split_ws(line);
  if (tok.size() != 3 || tok[0] != "ACGMM1") throw DataError("ACGMM1: bad header");
  const auto n = io::parse_int(tok[1]);
  const auto m = io::parse_int(tok[2]);
  if (!n || !m || *n < 1 || *m < 1) throw DataError("ACGMM1: bad header");
  GmmModel g;
  g.weights.resize(*n);
  io::read_f64_le(is, std::span<double>(g.weights.data(), static_cast<std::size_t>(*n)));
  g.means = io::read_matrix_rows(is, *n, *m);
  g.variances = io::read_matrix_rows(is, *n, *m);
  if (is.peek() != std::char_traits<char>::eof()) throw DataError("ACGMM1: trailing bytes");
  return g;
}

void write_gmm(const std::filesystem::path& path, const GmmModel& model) {
  io::write_file(path, serialize_gmm(model));
}

GmmModel read_gmm(const std::filesystem::path& path) { return deserialize_gmm(io::read_file(path)); }

}  // namespace accent
