#ifndef MVBOW_LINALG_HPP
#define MVBOW_LINALG_HPP

#include <Eigen/Core>
#include <cmath>

namespace mvbow {

// Flips each column so its largest-magnitude component (first such index on
// ties) comes out positive. Fixing the sign this way makes trained bases
// byte-reproducible across runs and eigensolver paths.
inline void fix_eigenvector_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const double a = std::abs(vectors(r, c));
      if (a > best) {
        best = a;
        arg = r;
      }
    }
    if (vectors(arg, c) < 0.0) vectors.col(c) = -vectors.col(c);
  }
}

}  // namespace mvbow

#endif  // MVBOW_LINALG_HPP
