//==============================================================================
// Copyright (c) 2026 The patchdex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//==============================================================================
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "patchdex/types.hpp"

namespace patchdex {

/// PCA whitening fitted on patch vectors. Rows of `projection` are the
/// top-kept_dim eigenvectors of the training covariance, each scaled by
/// 1 / sqrt(lambda + eps).
struct WhiteningModel {
  std::uint32_t input_dim = 0;
  std::uint32_t kept_dim = 0;
  double eps = 0.0;
  std::vector<double> mean;
  std::vector<double> eigenvalues;  // descending
  std::vector<double> projection;   // kept_dim x input_dim, row-major

  bool operator==(const WhiteningModel&) const = default;
};

/// Row-major n x d block of training vectors.
struct TrainingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
};

/// Stacks every patch vector of every set into one training matrix.
TrainingMatrix CollectPatchVectors(std::span<const PatchFeatureSet> sets);

/// Mean and covariance C = (X - mu)^T (X - mu) / n. Parallel accumulation
/// over fixed row chunks, combined in chunk order, so the result does not
/// depend on the thread count.
void MeanAndCovariance(const TrainingMatrix& x, std::vector<double>& mean,
                       std::vector<double>& covariance);
/// Rank-one accumulation, one sample at a time. Reference for the above.
void MeanAndCovarianceSerial(const TrainingMatrix& x, std::vector<double>& mean,
                             std::vector<double>& covariance);

WhiteningModel FitWhitening(const TrainingMatrix& x, double keep_ratio = 0.5);

/// projection * (v - mean), without renormalization.
std::vector<double> ApplyWhiteningRaw(const WhiteningModel& model,
                                      std::span<const float> v);

/// Whitened and L2-renormalized. A vector equal to the mean comes back as
/// the zero vector flagged degenerate.
FeatureVector ApplyWhitening(const WhiteningModel& model,
                             const FeatureVector& v);

PatchFeatureSet ApplyWhitening(const WhiteningModel& model,
                               const PatchFeatureSet& set);

/// One bit per dimension, bit k set iff v_k > 0, packed little-endian
/// within each byte (bit k lives in byte k/8 at position k%8).
struct QuantizedCode {
  std::uint32_t bits = 0;
  std::vector<std::uint8_t> bytes;

  bool operator==(const QuantizedCode&) const = default;
};

QuantizedCode Quantize(std::span<const float> v);
inline QuantizedCode Quantize(const FeatureVector& v) {
  return Quantize(v.view());
}

std::uint32_t HammingDistance(const QuantizedCode& a, const QuantizedCode& b);

}  // namespace patchdex
