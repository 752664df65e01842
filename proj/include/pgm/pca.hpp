#ifndef PGM_PCA_HPP
#define PGM_PCA_HPP

#include <random>

#include "pgm/dataset.hpp"

namespace pgm {

struct PcaParams {
  double eps = 1e-9;   // angle between successive directions, radians
  int max_iter = 1000;
  int restarts = 3;    // fresh random starts on non-convergence
};

struct PrincipalComponent {
  Eigen::VectorXd origin;     // a0
  Eigen::VectorXd direction;  // a1, unit length
  Eigen::VectorXd scores;     // b_i, one per observation
  double eigenvalue = 0.0;    // Bessel-corrected score variance
  bool converged = true;
  bool near_degenerate = false;  // leading eigenvalue ties the residual average
  int iterations = 0;
};

struct PcaBasis {
  Eigen::VectorXd origin;
  Eigen::MatrixXd components;   // one column per component, orthonormal
  Eigen::VectorXd eigenvalues;  // non-increasing
  bool complete = true;         // false when rank deficiency stopped the fit early
  bool converged = true;
  int requested = 0;

  int count() const { return static_cast<int>(components.cols()); }
};

/// One principal component by alternating score and direction updates.
/// Scores of gapped rows restrict the inner product and its normalization
/// to the row's present coordinates.
PrincipalComponent fit_first_component(const DataMatrix& X, std::mt19937_64& rng,
                                       const PcaParams& params = {});

/// Removes the component: x' = x - a0 - a1 * score. Gapped cells stay gapped.
DataMatrix deflate(const DataMatrix& X, const PrincipalComponent& pc);

/// k components via repeated first-component fits with deflation.
PcaBasis fit_components(const DataMatrix& X, int k, std::mt19937_64& rng,
                        const PcaParams& params = {});

/// Coordinates of each observation in the basis; for gapped rows the score
/// restricts to present coordinates.
Eigen::MatrixXd project_to_basis(const DataMatrix& X, const PcaBasis& basis);

}  // namespace pgm

#endif
