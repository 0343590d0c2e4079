#pragma once

// Random instance generators shared by the unit and acceptance suites.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "fsu/eval/eval.hpp"
#include "fsu/numgrad/tensor.hpp"

namespace fsu::testing {

using numgrad::Tensor;
using eval::DetectionResult;
using eval::GroundTruth;

inline Tensor gaussian(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> n;
  Tensor t(r, c);
  for (double& v : t.data()) v = n(rng);
  return t;
}

inline Tensor unit_rows(Tensor t) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double sq = 0;
    for (double v : t.row_span(r)) sq += v * v;
    for (double& v : t.row_span(r)) v /= std::sqrt(sq);
  }
  return t;
}

// Random orthogonal matrix from Gram-Schmidt.
inline Tensor random_rotation(std::mt19937_64& rng, std::size_t d) {
  Tensor q = gaussian(rng, d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += q(i, k) * q(j, k);
      for (std::size_t k = 0; k < d; ++k) q(i, k) -= dot * q(j, k);
    }
    double sq = 0;
    for (std::size_t k = 0; k < d; ++k) sq += q(i, k) * q(i, k);
    for (std::size_t k = 0; k < d; ++k) q(i, k) /= std::sqrt(sq);
  }
  return q;
}

// rows of `x` multiplied by q^T, i.e. every row vector rotated by q
inline Tensor rotate(const Tensor& x, const Tensor& q) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t i = 0; i < q.rows(); ++i)
      for (std::size_t k = 0; k < x.cols(); ++k) out(r, i) += q(i, k) * x(r, k);
  return out;
}

inline fsu::oracle::Matrix rows_of(const Tensor& t) {
  fsu::oracle::Matrix m(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) m[r].assign(t.row_span(r).begin(), t.row_span(r).end());
  return m;
}

inline Tensor random_logits(std::mt19937_64& rng, std::size_t T, std::size_t N, bool coarse) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> q(-2, 2);
  Tensor t(T, N);
  for (double& v : t.data()) v = coarse ? 0.5 * q(rng) : u(rng);
  return t;
}

inline std::vector<fsu::oracle::Det> to_oracle(const std::vector<DetectionResult>& d) {
  std::vector<fsu::oracle::Det> out;
  for (const auto& x : d) out.push_back({x.video_id, x.interval.start, x.interval.end, x.score});
  return out;
}

inline std::vector<fsu::oracle::Gt> to_oracle(const std::vector<GroundTruth>& g) {
  std::vector<fsu::oracle::Gt> out;
  for (const auto& x : g) out.push_back({x.video_id, x.interval.start, x.interval.end});
  return out;
}

struct Instance {
  std::vector<DetectionResult> dets;
  std::vector<GroundTruth> gts;
};

inline Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pos(0, 11);
  std::uniform_int_distribution<int> coarse(0, 4);
  Instance in;
  const std::size_t n_gt = rng() % 6, n_det = rng() % 11;
  auto interval = [&] {
    std::size_t a = pos(rng), b = pos(rng);
    if (a > b) std::swap(a, b);
    return fsu::data::Interval{a, b + 1};
  };
  for (std::size_t i = 0; i < n_gt; ++i) in.gts.push_back({"v" + std::to_string(rng() % 2), 0, interval()});
  for (std::size_t i = 0; i < n_det; ++i) {
    // coarse scores so ties get exercised
    in.dets.push_back({"v" + std::to_string(rng() % 2), 0, interval(), 0.25 * coarse(rng)});
  }
  return in;
}

}  // namespace fsu::testing
