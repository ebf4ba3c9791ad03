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
#include "patchdex/whitening.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "patchdex/error.hpp"

namespace patchdex {
namespace {

// Four-way unrolled dot product with a fixed summation order.
double Dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

void CheckTraining(const TrainingMatrix& x) {
  if (x.rows < 2) {
    throw Error(ErrorKind::kEmptyInput,
                "whitening needs at least 2 training vectors, got " +
                    std::to_string(x.rows));
  }
  if (x.cols < 2) {
    throw Error(ErrorKind::kInvariant, "whitening needs dimension >= 2");
  }
  if (x.values.size() != x.rows * x.cols) {
    throw Error(ErrorKind::kInvariant, "training matrix shape mismatch");
  }
  for (std::size_t k = 0; k < x.values.size(); ++k) {
    if (!std::isfinite(x.values[k])) {
      throw Error(ErrorKind::kNonFinite,
                  "training value at row " + std::to_string(k / x.cols) +
                      " is not finite");
    }
  }
}

}  // namespace

TrainingMatrix CollectPatchVectors(std::span<const PatchFeatureSet> sets) {
  TrainingMatrix x;
  for (const PatchFeatureSet& set : sets) {
    for (const FeatureVector& v : set.vectors) {
      if (x.cols == 0) x.cols = v.size();
      if (v.size() != x.cols) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "training vectors of length " + std::to_string(v.size()) +
                        " and " + std::to_string(x.cols));
      }
      x.values.insert(x.values.end(), v.values.begin(), v.values.end());
      ++x.rows;
    }
  }
  return x;
}

void MeanAndCovariance(const TrainingMatrix& x, std::vector<double>& mean,
                       std::vector<double>& covariance) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.values.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) mean[c] += row[c];
  }
  for (double& m : mean) m /= double(n);

  // Centered data stored dimension-major so each covariance entry is a
  // contiguous dot product.
  std::vector<double> centered(d * n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.values.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) centered[c * n + r] = row[c] - mean[c];
  }

  covariance.assign(d * d, 0.0);
  const long dl = static_cast<long>(d);
#pragma omp parallel for schedule(dynamic, 4)
  for (long a = 0; a < dl; ++a) {
    const double* xa = centered.data() + a * n;
    for (long b = a; b < dl; ++b) {
      const double v = Dot(xa, centered.data() + b * n, n) / double(n);
      covariance[a * d + b] = v;
      covariance[b * d + a] = v;
    }
  }
}

void MeanAndCovarianceSerial(const TrainingMatrix& x, std::vector<double>& mean,
                             std::vector<double>& covariance) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += x.values[r * d + c];
  }
  for (double& m : mean) m /= double(n);
  covariance.assign(d * d, 0.0);
  std::vector<double> centered(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      centered[c] = x.values[r * d + c] - mean[c];
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        covariance[a * d + b] += centered[a] * centered[b];
      }
    }
  }
  for (double& v : covariance) v /= double(n);
}

WhiteningModel FitWhitening(const TrainingMatrix& x, double keep_ratio) {
  CheckTraining(x);
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
    throw Error(ErrorKind::kInvariant, "keep ratio must be in (0, 1]");
  }
  const std::size_t d = x.cols;
  std::vector<double> mean;
  std::vector<double> cov;
  MeanAndCovariance(x, mean, cov);

  double trace = 0.0;
  for (std::size_t k = 0; k < d; ++k) trace += cov[k * d + k];
  if (!(trace > 0.0)) {
    throw Error(ErrorKind::kDegenerate,
                "degenerate training set: all " + std::to_string(x.rows) +
                    " vectors are identical");
  }

  const Eigen::Map<const Eigen::MatrixXd> c(cov.data(), Eigen::Index(d),
                                            Eigen::Index(d));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::kDegenerate, "eigendecomposition did not converge");
  }

  WhiteningModel model;
  model.input_dim = static_cast<std::uint32_t>(d);
  model.kept_dim = static_cast<std::uint32_t>(
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::floor(double(d) * keep_ratio + 1e-9))));
  model.eps = 1e-8 * trace / double(d);
  model.mean = std::move(mean);
  model.eigenvalues.resize(model.kept_dim);
  model.projection.resize(std::size_t(model.kept_dim) * d);

  // Eigen returns ascending eigenvalues; walk from the top.
  const Eigen::VectorXd& values = solver.eigenvalues();
  const Eigen::MatrixXd& vectors = solver.eigenvectors();
  for (std::uint32_t k = 0; k < model.kept_dim; ++k) {
    const Eigen::Index src = Eigen::Index(d) - 1 - k;
    const double lambda = std::max(0.0, values(src));
    model.eigenvalues[k] = lambda;

    Eigen::Index pivot = 0;
    for (Eigen::Index r = 1; r < Eigen::Index(d); ++r) {
      if (std::abs(vectors(r, src)) > std::abs(vectors(pivot, src))) pivot = r;
    }
    const double sign = vectors(pivot, src) < 0 ? -1.0 : 1.0;
    const double scale = sign / std::sqrt(lambda + model.eps);
    double* row = model.projection.data() + std::size_t(k) * d;
    for (std::size_t r = 0; r < d; ++r) {
      row[r] = vectors(Eigen::Index(r), src) * scale;
    }
  }
  return model;
}

std::vector<double> ApplyWhiteningRaw(const WhiteningModel& model,
                                      std::span<const float> v) {
  if (v.size() != model.input_dim) {
    throw Error(ErrorKind::kDimensionMismatch,
                "vector of length " + std::to_string(v.size()) +
                    " for a model with input_dim " +
                    std::to_string(model.input_dim));
  }
  std::vector<double> centered(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) centered[k] = v[k] - model.mean[k];
  std::vector<double> out(model.kept_dim);
  for (std::uint32_t k = 0; k < model.kept_dim; ++k) {
    out[k] = Dot(model.projection.data() + std::size_t(k) * model.input_dim,
                 centered.data(), centered.size());
  }
  return out;
}

FeatureVector ApplyWhitening(const WhiteningModel& model,
                             const FeatureVector& v) {
  const std::vector<double> raw = ApplyWhiteningRaw(model, v.values);
  double norm2 = 0.0;
  for (double x : raw) norm2 += x * x;
  FeatureVector out;
  out.patch = v.patch;
  out.normalized = true;
  out.values.resize(raw.size());
  if (norm2 == 0.0) {
    out.degenerate = true;
    std::fill(out.values.begin(), out.values.end(), 0.0f);
    return out;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (std::size_t k = 0; k < raw.size(); ++k) {
    out.values[k] = static_cast<float>(raw[k] * inv);
  }
  return out;
}

PatchFeatureSet ApplyWhitening(const WhiteningModel& model,
                               const PatchFeatureSet& set) {
  PatchFeatureSet out;
  out.image_id = set.image_id;
  out.levels = set.levels;
  out.grid = set.grid;
  out.channels = set.channels;
  out.vectors.reserve(set.vectors.size());
  for (const FeatureVector& v : set.vectors) {
    out.vectors.push_back(ApplyWhitening(model, v));
  }
  return out;
}

QuantizedCode Quantize(std::span<const float> v) {
  QuantizedCode code;
  code.bits = static_cast<std::uint32_t>(v.size());
  code.bytes.assign((v.size() + 7) / 8, 0);
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] > 0.0f) code.bytes[k / 8] |= std::uint8_t(1u << (k % 8));
  }
  return code;
}

std::uint32_t HammingDistance(const QuantizedCode& a, const QuantizedCode& b) {
  if (a.bits != b.bits || a.bytes.size() != b.bytes.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "codes of " + std::to_string(a.bits) + " and " +
                    std::to_string(b.bits) + " bits");
  }
  std::uint32_t count = 0;
  for (std::size_t k = 0; k < a.bytes.size(); ++k) {
    count += std::popcount(static_cast<unsigned>(a.bytes[k] ^ b.bytes[k]));
  }
  return count;
}

}  // namespace patchdex
