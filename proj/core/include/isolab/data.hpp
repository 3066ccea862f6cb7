#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "isolab/linalg.hpp"
#include "isolab/rng.hpp"

namespace isolab {

enum class DataMode { GaussianIid, OrthogonalClusters };

std::string_view to_string(DataMode mode);
DataMode parse_data_mode(std::string_view text);

struct DataSpec {
  int input_dim = 15;
  int num_samples = 256;
  DataMode mode = DataMode::GaussianIid;
  double aug_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Two augmented views of one base sample.
struct AugmentedPair {
  Vector x1;
  Vector x2;
  int base_index = -1;
};

/// All pairs of one step, stored column-wise (N x P) for batched algebra.
struct AugmentedBatch {
  Matrix x1;
  Matrix x2;

  Eigen::Index size() const noexcept { return x1.cols(); }
  AugmentedPair pair(Eigen::Index i) const {
    return {x1.col(i), x2.col(i), static_cast<int>(i)};
  }
};

/// Base samples as the columns of an N x P matrix.
///   gaussian_iid:        i.i.d. standard normal entries.
///   orthogonal_clusters: P orthonormal directions scaled by sqrt(N).
Matrix make_dataset(const DataSpec& spec);

/// x_view = base + sigma * g with an independent standard normal g per view.
AugmentedPair sample_pair(const Vector& base, double sigma, Rng& rng,
                          int base_index = -1);

/// sample_pair applied to every column of `base`, in column order.
AugmentedBatch sample_batch(const Matrix& base, double sigma, Rng& rng);

}  // namespace isolab
