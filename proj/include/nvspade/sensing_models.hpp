#pragma once

#include <vector>

#include "nvspade/types.hpp"

namespace nvspade {

/// CW-ODMR response. Frequencies share one unit; the field map constants default to SI.
struct OdmrModel {
  double chi = 0.5;
  double omega0 = 2.87e9;
  double linewidth = 1.0e7;
  double g_factor = 2.0;
  double bohr_magneton = 9.2740100783e-24;
  double hbar = 1.054571817e-34;
  double strain = 0.0;

  void validate() const;
};

/// 1 - chi/2 (L(omega, -omega_k) + L(omega, +omega_k)), L(w, O) = 1 / (1 + ((w - omega0 - O)/linewidth)^2)
double odmr_intensity(double omega, double omega_k, const OdmrModel& model);
/// Same profile in the centered variables gamma = (omega - omega0)/linewidth, phi = omega_k/linewidth.
double odmr_intensity_dimensionless(double gamma, double phi, double chi);

double zeeman_from_field(double field, const OdmrModel& model);
/// Nonnegative field with zeeman_from_field(field) = omega_k. Throws below the strain floor.
double field_from_zeeman(double omega_k, const OdmrModel& model);

/// (omega0/omega_k)^2 cos^2(omega_k t / 2). Throws if omega_k < omega0 or omega0 <= 0.
double rabi_intensity(double t, double omega_k, double omega0);
/// Same with gamma = omega0 t / 2 and phi = omega_k / omega0: cos^2(phi gamma) / phi^2.
double rabi_intensity_dimensionless(double gamma, double phi);

/// I / sum(I). Throws on nonpositive entries.
Vec brightness_from_intensities(const Vec& intensities);

enum class FieldModel { Odmr, Rabi };

/// Dimensionless response I(gamma | phi) of the chosen model.
double model_intensity(FieldModel kind, double gamma, double phi, double chi = 0.5);

/// Brightness estimates per modulation point. Row g of `brightnesses` is b_hat at gammas(g).
struct BrightnessTrace {
  Vec gammas;
  Mat brightnesses;
  Vec budgets;  ///< photons behind each row's estimate

  /// I_hat(g, k) = budgets(g) * brightnesses(g, k)
  Mat intensities() const;
};

struct FieldFitOptions {
  FieldModel kind = FieldModel::Odmr;
  double chi = 0.5;       ///< ODMR contrast, held fixed during the fit
  double phi_min = 0.0;   ///< coarse grid bounds; Rabi needs phi_min >= 1
  double phi_max = 6.0;
  int grid_points = 121;
};

struct EmitterFit {
  double phi = 0.0;
  double scale = 0.0;
  double residual_norm = 0.0;
  bool converged = false;
  bool rank_deficient = false;
};

/// Independent per-emitter fits of I_hat(:, k) ~ c_k I(gamma | phi_k). Each fit seeds
/// Levenberg-Marquardt from the best point of a coarse phi grid (scale profiled out).
/// `init`, when non-empty, adds one start per emitter.
std::vector<EmitterFit> fit_field(const Vec& gammas, const Mat& intensities, const FieldFitOptions& options,
                                  const Vec& init = {});
std::vector<EmitterFit> fit_field(const BrightnessTrace& trace, const FieldFitOptions& options, const Vec& init = {});

/// sqrt(mean_k (phi_hat_k - phi_k)^2)
double field_rmse(const Vec& phi_true, const std::vector<EmitterFit>& fits);

}  // namespace nvspade
