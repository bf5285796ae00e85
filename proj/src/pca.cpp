#include "pacte/pca.hpp"

#include <cmath>
#include <string>

#include "pacte/error.hpp"
#include "pacte/random.hpp"

namespace pacte {

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (const auto& b : basis) {
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * b[i];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * b[i];
  }
}

}  // namespace

PcaResult pca(const std::vector<std::vector<double>>& vectors, std::size_t target_dim,
              double tolerance, int max_iterations) {
  const std::size_t n = vectors.size();
  if (n < 2) throw DataError("PCA needs at least 2 vectors");
  const std::size_t dim = vectors.front().size();
  if (target_dim < 1 || target_dim > dim)
    throw ConfigError("PCA target dimension " + std::to_string(target_dim) + " outside [1, " +
                      std::to_string(dim) + "]");
  for (const auto& v : vectors)
    if (v.size() != dim) throw DataError("PCA input vectors have different dims");

  PcaResult r;
  r.mean.assign(dim, 0.0);
  for (const auto& v : vectors)
    for (std::size_t i = 0; i < dim; ++i) r.mean[i] += v[i];
  for (auto& m : r.mean) m /= static_cast<double>(n);

  std::vector<double> cov(dim * dim, 0.0);
  for (const auto& v : vectors)
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        cov[i * dim + j] += (v[i] - r.mean[i]) * (v[j] - r.mean[j]);
  double scale = 0.0;
  for (auto& c : cov) {
    c /= static_cast<double>(n - 1);
    scale = std::max(scale, std::abs(c));
  }

  Rng rng(0x9ca);
  std::vector<double> v(dim), w(dim);
  for (std::size_t comp = 0; comp < target_dim; ++comp) {
    for (auto& x : v) x = rng.normal();
    orthogonalize(v, r.components);
    double nv = norm(v);
    for (auto& x : v) x /= nv;
    double lambda = 0.0, residual = 0.0;
    bool converged = false;
    for (int it = 0; it < max_iterations; ++it) {
      for (std::size_t i = 0; i < dim; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) s += cov[i * dim + j] * v[j];
        w[i] = s;
      }
      lambda = 0.0;
      for (std::size_t i = 0; i < dim; ++i) lambda += v[i] * w[i];
      residual = 0.0;
      for (std::size_t i = 0; i < dim; ++i) residual += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
      residual = std::sqrt(residual);
      if (residual <= tolerance * std::max(scale, 1.0)) {
        converged = true;
        break;
      }
      orthogonalize(w, r.components);
      const double nw = norm(w);
      if (nw < 1e-300) {  // remaining subspace carries no variance
        converged = true;
        lambda = 0.0;
        break;
      }
      for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / nw;
    }
    if (!converged)
      throw NumericError("PCA power iteration did not converge for component " +
                         std::to_string(comp + 1) + " (residual " + std::to_string(residual) + ")");
    // Sign convention: first non-negligible entry positive.
    double vmax = 0.0;
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    for (double x : v) {
      if (std::abs(x) > 1e-9 * vmax) {
        if (x < 0)
          for (auto& y : v) y = -y;
        break;
      }
    }
    r.components.push_back(v);
    r.eigenvalues.push_back(lambda);
    // Deflate.
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) cov[i * dim + j] -= lambda * v[i] * v[j];
  }

  for (const auto& x : vectors) {
    std::vector<double> p(target_dim, 0.0);
    for (std::size_t c = 0; c < target_dim; ++c)
      for (std::size_t i = 0; i < dim; ++i) p[c] += (x[i] - r.mean[i]) * r.components[c][i];
    r.projections.push_back(std::move(p));
  }
  return r;
}

std::vector<std::vector<double>> pca_project(const std::vector<std::vector<double>>& vectors,
                                             std::size_t target_dim) {
  return pca(vectors, target_dim).projections;
}

}  // namespace pacte
