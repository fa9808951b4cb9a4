#pragma once

#include "nvspade/types.hpp"

namespace nvspade {

/// A K-emitter scene. Positions are stored in units of the PSF width; `sigma`
/// carries the physical length scale and is only applied at I/O boundaries.
class EmitterEnsemble {
 public:
  EmitterEnsemble() = default;

  /// Positions already expressed in units of sigma.
  EmitterEnsemble(Positions positions, Vec brightnesses, double sigma = 1.0);

  static EmitterEnsemble from_physical(const Positions& physical_positions, Vec brightnesses,
                                       double sigma);

  /// Equal-brightness ensemble (the calibration-stage state).
  static EmitterEnsemble uniform(Positions positions, double sigma = 1.0);

  int size() const { return static_cast<int>(positions_.rows()); }
  const Positions& positions() const { return positions_; }
  const Vec& brightnesses() const { return brightnesses_; }
  double sigma() const { return sigma_; }
  Positions physical_positions() const { return positions_ * sigma_; }

  EmitterEnsemble with_brightnesses(Vec b) const { return {positions_, std::move(b), sigma_}; }

 private:
  Positions positions_;
  Vec brightnesses_;
  double sigma_ = 1.0;
};

/// Pairwise overlaps of the emitter states; symmetric positive definite with unit diagonal.
struct GramMatrix {
  Mat entries;
  int size() const { return static_cast<int>(entries.rows()); }
};

/// Emitter states expressed in the eigenbasis of rho = sum_k b_k |psi_k><psi_k|.
/// Column k of `psi` holds state k; `eigenvalues` are sorted descending.
struct EigenbasisRep {
  CMat psi;
  Vec eigenvalues;
  Vec priors;
  int size() const { return static_cast<int>(psi.cols()); }
};

/// Throws InvalidArgument unless b is strictly positive and sums to one within `tol`.
void check_open_simplex(const Vec& b, double tol = 1e-12, const char* what = "brightness");
/// Nonnegative entries summing to one within `tol`.
void check_closed_simplex(const Vec& b, double tol = 1e-9, const char* what = "probability");

/// G_ij = exp(-|r_i - r_j|^2 / 8 sigma^2). Throws DegenerateGeometryError if two
/// emitters are closer than 1e-9 sigma.
GramMatrix gram_matrix(const EmitterEnsemble& ensemble);
/// Same, for positions in units of sigma.
GramMatrix gram_matrix(const Positions& positions);

/// Overlaps <psi(a_j)|psi(b_k)> between two sets of positions of physical width sigma.
Mat cross_gram(const Positions& a, const Positions& b, double sigma = 1.0);

/// Four-step construction: G = U D U^T, S = A A^T with A = D^(1/2) U^T B^(1/2),
/// S = V^T Lambda V, Psi = V D^(1/2) U^T. Eigenvectors are sorted by descending
/// eigenvalue with the first significant component made positive.
/// Throws NumericalError if the smallest Gram eigenvalue is below 1e-12 of the largest.
EigenbasisRep eigenbasis_representation(const GramMatrix& gram, const Vec& priors);

double min_pairwise_separation(const Positions& positions);

}  // namespace nvspade
