#include "isolab/data.hpp"

#include <cmath>

#include "isolab/errors.hpp"

namespace isolab {

std::string_view to_string(DataMode mode) {
  switch (mode) {
    case DataMode::GaussianIid:
      return "gaussian_iid";
    case DataMode::OrthogonalClusters:
      return "orthogonal_clusters";
  }
  return "?";
}

DataMode parse_data_mode(std::string_view text) {
  if (text == "gaussian_iid") return DataMode::GaussianIid;
  if (text == "orthogonal_clusters") return DataMode::OrthogonalClusters;
  throw ConfigError("unknown data mode '" + std::string(text) + "'");
}

void DataSpec::validate() const {
  if (input_dim < 1) throw ConfigError("data.input_dim must be positive");
  if (num_samples < 1) throw ConfigError("data.num_samples must be positive");
  if (!(aug_sigma >= 0.0) || !std::isfinite(aug_sigma)) {
    throw ConfigError("data.aug_sigma must be a finite non-negative real");
  }
  if (mode == DataMode::OrthogonalClusters && num_samples > input_dim) {
    throw ConfigError(
        "orthogonal_clusters needs num_samples <= input_dim (got P=" +
        std::to_string(num_samples) + ", N=" + std::to_string(input_dim) + ")");
  }
}

namespace {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = rng.normal();
  }
  return out;
}

}  // namespace

Matrix make_dataset(const DataSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Matrix x = gaussian_matrix(spec.input_dim, spec.num_samples, rng);
  if (spec.mode == DataMode::GaussianIid) return x;

  // Modified Gram-Schmidt, two passes for orthogonality at roundoff level.
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      for (Eigen::Index k = 0; k < j; ++k) {
        x.col(j) -= x.col(k).dot(x.col(j)) * x.col(k);
      }
      x.col(j).normalize();
    }
  }
  return x * std::sqrt(static_cast<double>(spec.input_dim));
}

AugmentedPair sample_pair(const Vector& base, double sigma, Rng& rng,
                          int base_index) {
  AugmentedPair pair{base, base, base_index};
  for (Eigen::Index i = 0; i < base.size(); ++i) pair.x1(i) += sigma * rng.normal();
  for (Eigen::Index i = 0; i < base.size(); ++i) pair.x2(i) += sigma * rng.normal();
  return pair;
}

AugmentedBatch sample_batch(const Matrix& base, double sigma, Rng& rng) {
  AugmentedBatch batch{base, base};
  for (Eigen::Index j = 0; j < base.cols(); ++j) {
    for (Eigen::Index i = 0; i < base.rows(); ++i) batch.x1(i, j) += sigma * rng.normal();
    for (Eigen::Index i = 0; i < base.rows(); ++i) batch.x2(i, j) += sigma * rng.normal();
  }
  return batch;
}

}  // namespace isolab
