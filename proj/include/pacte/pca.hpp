#pragma once

#include <cstddef>
#include <vector>

namespace pacte {

struct PcaResult {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // unit eigenvectors, largest eigenvalue first
  std::vector<double> eigenvalues;              // sample covariance eigenvalues
  std::vector<std::vector<double>> projections;
};

// Power iteration with deflation on the sample covariance matrix. Each
// component's first non-negligible entry is made positive.
PcaResult pca(const std::vector<std::vector<double>>& vectors, std::size_t target_dim = 2,
              double tolerance = 1e-10, int max_iterations = 10000);

std::vector<std::vector<double>> pca_project(const std::vector<std::vector<double>>& vectors,
                                             std::size_t target_dim = 2);

}  // namespace pacte
