#pragma once

#include <cmath>
#include <complex>
#include <utility>

#include "nvspade/types.hpp"

namespace nvspade::detail {

/// Eigen-decomposition of a real symmetric matrix with eigenvalues sorted descending
/// and each eigenvector's first significant component made positive.
inline std::pair<Vec, Mat> sorted_symmetric_eigen(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigen-decomposition failed");
  const auto n = m.rows();
  Vec values(n);
  Mat vectors(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    values(i) = es.eigenvalues()(n - 1 - i);
    vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  for (Eigen::Index c = 0; c < n; ++c) {
    const double scale = vectors.col(c).cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < n; ++r) {
      if (std::abs(vectors(r, c)) > 1e-8 * scale) {
        if (vectors(r, c) < 0) vectors.col(c) *= -1.0;
        break;
      }
    }
  }
  return {values, vectors};
}

/// Rotate each column by a global phase so its largest-magnitude entry is positive real.
inline void fix_column_phases(CMat& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::Index r = 0;
    m.col(c).cwiseAbs().maxCoeff(&r);
    const auto z = m(r, c);
    if (std::abs(z) > 0) m.col(c) *= std::conj(z) / std::abs(z);
  }
}

}  // namespace nvspade::detail
