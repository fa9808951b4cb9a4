#include "nvspade/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "optimize.hpp"

namespace nvspade {

namespace {

constexpr double kProbFloor = 1e-300;

Vec flatten(const Positions& r) {
  Vec x(2 * r.rows());
  for (Eigen::Index k = 0; k < r.rows(); ++k) {
    x(2 * k) = r(k, 0);
    x(2 * k + 1) = r(k, 1);
  }
  return x;
}

Positions unflatten(const Vec& x) {
  Positions r(x.size() / 2, 2);
  for (Eigen::Index k = 0; k < r.rows(); ++k) {
    r(k, 0) = x(2 * k);
    r(k, 1) = x(2 * k + 1);
  }
  return r;
}

Vec softmax(const Vec& z) {
  Vec e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

// Logits with the last entry pinned at zero.
Vec full_logits(const Vec& free) {
  Vec z = Vec::Zero(free.size() + 1);
  z.head(free.size()) = free;
  return z;
}

Vec logits_from(const Vec& b) {
  const Vec lb = b.cwiseMax(1e-12).array().log();
  return (lb.head(lb.size() - 1).array() - lb(lb.size() - 1)).matrix();
}

// Probability of a unit Gaussian centred at m landing in [a, b), without cancellation in the tails.
double interval_mass(double a, double b, double m) {
  constexpr double r2 = 0.70710678118654752;
  a -= m;
  b -= m;
  if (a > 0.0) return 0.5 * (std::erfc(a * r2) - std::erfc(b * r2));
  return 0.5 * (std::erfc(-b * r2) - std::erfc(-a * r2));
}

double unit_gauss(double x) { return 0.39894228040143268 * std::exp(-0.5 * x * x); }

// Per-emitter pixel marginals along one axis and their derivatives in the emitter coordinate.
struct AxisMarginals {
  Mat p;   // K x cells
  Mat dp;
};

AxisMarginals axis_marginals(const Vec& centres, std::int64_t first, int cells, double pitch, bool deriv) {
  AxisMarginals m;
  const auto k = centres.size();
  m.p.resize(k, cells);
  if (deriv) m.dp.resize(k, cells);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (int c = 0; c < cells; ++c) {
      const double a = static_cast<double>(first + c) * pitch;
      const double b = a + pitch;
      m.p(j, c) = interval_mass(a, b, centres(j));
      if (deriv) m.dp(j, c) = unit_gauss(a - centres(j)) - unit_gauss(b - centres(j));
    }
  }
  return m;
}

// Per-pixel component probabilities scaled by the row max; `offset` collects the count-weighted log scales.
struct ComponentDensities {
  Mat f;
  Vec w;
  double offset = 0.0;
};

ComponentDensities component_densities(const DetectorImage& img, const Positions& r) {
  ComponentDensities cd;
  const AxisMarginals mx = axis_marginals(r.col(0), img.first_col, img.cols, img.pitch, false);
  const AxisMarginals my = axis_marginals(r.col(1), img.first_row, img.rows, img.pitch, false);
  const auto n = static_cast<Eigen::Index>(img.col.size());
  cd.f.resize(n, r.rows());
  cd.w = img.counts;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = img.col[static_cast<size_t>(i)];
    const int q = img.row[static_cast<size_t>(i)];
    for (Eigen::Index k = 0; k < r.rows(); ++k) cd.f(i, k) = mx.p(k, c) * my.p(k, q);
    const double top = std::max(cd.f.row(i).maxCoeff(), kProbFloor);
    cd.f.row(i) /= top;
    cd.offset += img.counts(i) * std::log(top);
  }
  return cd;
}

}  // namespace

Point estimate_centroid(const Positions& di) {
  if (di.rows() == 0) throw InvalidArgument("centroid of an empty photon set");
  return di.colwise().mean().transpose();
}

DetectorImage bin_detector(const Positions& di, double pitch) {
  if (!(pitch > 0.0)) throw InvalidArgument("pixel pitch must be positive");
  DetectorImage img;
  img.pitch = pitch;
  img.counts.resize(0);
  if (di.rows() == 0) return img;
  std::vector<std::int64_t> cx(static_cast<size_t>(di.rows())), cy(cx.size());
  for (Eigen::Index i = 0; i < di.rows(); ++i) {
    if (!std::isfinite(di(i, 0)) || !std::isfinite(di(i, 1))) throw InvalidArgument("non-finite photon position");
    cx[static_cast<size_t>(i)] = static_cast<std::int64_t>(std::floor(di(i, 0) / pitch));
    cy[static_cast<size_t>(i)] = static_cast<std::int64_t>(std::floor(di(i, 1) / pitch));
  }
  const auto [xlo, xhi] = std::minmax_element(cx.begin(), cx.end());
  const auto [ylo, yhi] = std::minmax_element(cy.begin(), cy.end());
  img.first_col = *xlo;
  img.first_row = *ylo;
  img.cols = static_cast<int>(*xhi - *xlo + 1);
  img.rows = static_cast<int>(*yhi - *ylo + 1);
  std::vector<double> dense(static_cast<size_t>(img.cols) * static_cast<size_t>(img.rows), 0.0);
  for (size_t i = 0; i < cx.size(); ++i)
    dense[static_cast<size_t>(cy[i] - img.first_row) * static_cast<size_t>(img.cols) +
          static_cast<size_t>(cx[i] - img.first_col)] += 1.0;
  std::vector<double> counts;
  for (int q = 0; q < img.rows; ++q)
    for (int c = 0; c < img.cols; ++c) {
      const double v = dense[static_cast<size_t>(q) * static_cast<size_t>(img.cols) + static_cast<size_t>(c)];
      if (v <= 0.0) continue;
      img.col.push_back(c);
      img.row.push_back(q);
      counts.push_back(v);
    }
  img.counts = Eigen::Map<const Vec>(counts.data(), static_cast<Eigen::Index>(counts.size()));
  return img;
}

double calibration_log_likelihood(const Positions& r, const Positions& di, const Vec& pad_counts,
                                  const PadSpadeConfig& pad, Vec* grad) {
  return calibration_log_likelihood(r, bin_detector(di), pad_counts, pad, grad);
}

double calibration_log_likelihood(const Positions& r, const DetectorImage& img, const Vec& pad_counts,
                                  const PadSpadeConfig& pad, Vec* grad) {
  const auto k = r.rows();
  const double inv_k = 1.0 / static_cast<double>(k);
  double ll = 0.0;
  if (grad) grad->setZero(2 * k);

  if (!img.empty()) {
    const AxisMarginals mx = axis_marginals(r.col(0), img.first_col, img.cols, img.pitch, grad != nullptr);
    const AxisMarginals my = axis_marginals(r.col(1), img.first_row, img.rows, img.pitch, grad != nullptr);
    for (size_t i = 0; i < img.col.size(); ++i) {
      const int c = img.col[i];
      const int q = img.row[i];
      double p = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) p += mx.p(j, c) * my.p(j, q);
      p = std::max(p * inv_k, kProbFloor);
      const double n = img.counts(static_cast<Eigen::Index>(i));
      ll += n * std::log(p);
      if (grad) {
        const double w = n * inv_k / p;
        for (Eigen::Index j = 0; j < k; ++j) {
          (*grad)(2 * j) += w * mx.dp(j, c) * my.p(j, q);
          (*grad)(2 * j + 1) += w * mx.p(j, c) * my.dp(j, q);
        }
      }
    }
  }

  if (pad_counts.size() > 0) {
    const Vec b = Vec::Constant(k, 1.0 / static_cast<double>(k));
    Mat jac;
    const Vec p = pad_probabilities(r, b, pad, grad ? &jac : nullptr);
    if (p.size() != pad_counts.size()) throw InvalidArgument("PAD count vector has the wrong length");
    for (Eigen::Index q = 0; q < p.size(); ++q) {
      if (pad_counts(q) <= 0.0) continue;
      const double pq = std::max(p(q), kProbFloor);
      ll += pad_counts(q) * std::log(pq);
      if (grad) *grad += (pad_counts(q) / pq) * jac.row(q).transpose();
    }
  }
  return ll;
}

namespace {

struct FitResult {
  Vec x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

}  // namespace

CalibrationEstimate estimate_positions_mle(const Positions& di, const Vec& pad_counts, int k,
                                           const PadSpadeConfig& pad, const PositionFitOptions& opt) {
  if (k < 1) throw InvalidArgument("emitter count must be positive");
  const double total = static_cast<double>(di.rows()) + (pad_counts.size() > 0 ? pad_counts.sum() : 0.0);
  if (!(total > 0.0)) throw InvalidArgument("position estimation needs photons");
  const DetectorImage image = bin_detector(di);
  const double scale = 1.0 / total;

  CalibrationEstimate est;
  est.centroid = di.rows() > 0 ? estimate_centroid(di) : pad.origin;

  detail::Objective objective = [&](const Vec& x, Vec* g) {
    const double ll = calibration_log_likelihood(unflatten(x), image, pad_counts, pad, g);
    if (g) *g *= -scale;
    return -ll * scale;
  };

  auto polish = [&](const Vec& x0) {
    FitResult fr;
    auto res = detail::minimize_bfgs(objective, x0, 0.05, opt.gtol, opt.max_iterations);
    if (opt.nelder_mead_polish) {
      auto nm = detail::minimize_nelder_mead([&](const Vec& x) { return objective(x, nullptr); }, res.x, 0.01, 1e-10,
                                             2000);
      if (nm.value < res.value) {
        auto again = detail::minimize_bfgs(objective, nm.x, 0.01, opt.gtol, opt.max_iterations);
        again.iterations += res.iterations + nm.iterations;
        res = again;
      }
    }
    fr.x = res.x;
    fr.value = res.value;
    fr.iterations = res.iterations;
    fr.converged = res.converged;
    return fr;
  };

  // starting points
  std::vector<Vec> starts;
  Rng rng = make_rng(opt.seed, {tag(Stage::Optimizer)});
  if (opt.moment_start && di.rows() >= 2 && k >= 2) {
    const Eigen::RowVector2d mean = di.colwise().mean();
    const Positions centered = di.rowwise() - mean;
    const Eigen::Matrix2d cov = (centered.transpose() * centered) / static_cast<double>(di.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov - Eigen::Matrix2d::Identity());
    const double var = std::max(es.eigenvalues()(1), 1e-4);
    const Eigen::Vector2d axis = es.eigenvectors().col(1);
    // equally spaced points along the principal axis with matching variance
    const double half = std::sqrt(3.0 * (k - 1.0) / (k + 1.0)) * std::sqrt(var);
    Positions r(k, 2);
    for (int j = 0; j < k; ++j) {
      const double t = -half + 2.0 * half * j / (k - 1.0);
      r.row(j) = mean + t * axis.transpose();
    }
    starts.push_back(flatten(r));
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < opt.random_starts || starts.empty(); ++s) {
    Positions r(k, 2);
    for (int j = 0; j < k; ++j) {
      const double rad = 0.5 * std::sqrt(unif(rng));
      const double ang = 2.0 * M_PI * unif(rng);
      r(j, 0) = est.centroid.x() + rad * std::cos(ang);
      r(j, 1) = est.centroid.y() + rad * std::sin(ang);
    }
    starts.push_back(flatten(r));
  }

  FitResult best;
  int total_iter = 0;
  for (const auto& s : starts) {
    FitResult fr = polish(s);
    total_iter += fr.iterations;
    if (fr.value < best.value) best = fr;
  }

  // PAD counts are blind to mirroring an emitter through the sorter axes; the DI term is not.
  if (opt.reflection_search && pad_counts.size() > 0) {
    for (int pass = 0; pass < 2; ++pass) {
      bool improved = false;
      for (int j = 0; j < k; ++j) {
        for (int mode = 1; mode <= 3; ++mode) {
          Vec x = best.x;
          if (mode & 1) x(2 * j) = 2.0 * pad.origin.x() - x(2 * j);
          if (mode & 2) x(2 * j + 1) = 2.0 * pad.origin.y() - x(2 * j + 1);
          if (objective(x, nullptr) < best.value) {
            FitResult fr = polish(x);
            total_iter += fr.iterations;
            if (fr.value < best.value - 1e-12) {
              best = fr;
              improved = true;
            }
          }
        }
      }
      if (!improved) break;
    }
  }

  // degenerate-fit guard
  if (k >= 2 && min_pairwise_separation(unflatten(best.x)) < 1e-6) {
    est.degenerate_restart = true;
    Vec x = best.x;
    std::normal_distribution<double> normal(0.0, 1e-3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += normal(rng);
    FitResult fr = polish(x);
    total_iter += fr.iterations;
    best = fr;
  }

  est.positions = unflatten(best.x);
  est.log_likelihood = -best.value / scale;
  est.iterations = total_iter;
  est.starts = static_cast<int>(starts.size());
  est.converged = best.converged;
  return est;
}

CalibrationEstimate estimate_positions_mle(const PhotonData& data, int k, const PadSpadeConfig& pad,
                                           const PositionFitOptions& options) {
  return estimate_positions_mle(data.di_positions, data.spade_counts.cast<double>(), k, pad, options);
}

namespace {

// Maximizes sum_i w_i log(sum_k b_k f_ik) + sum_k n_k log((P b)_k) over the simplex via softmax logits.
struct BrightnessFit {
  Vec b;
  double ll = 0.0;
};

BrightnessFit fit_brightness(const Mat& f, const Vec& w, const Mat& p, const Vec& n, const Vec& start) {
  const auto k = start.size();
  const double total = (w.size() > 0 ? w.sum() : 0.0) + (n.size() > 0 ? n.sum() : 0.0);
  const double scale = total > 0.0 ? 1.0 / total : 1.0;
  detail::Objective obj = [&](const Vec& z, Vec* grad) {
    const Vec b = softmax(full_logits(z));
    double ll = 0.0;
    Vec gb = Vec::Zero(k);
    if (f.rows() > 0) {
      const Vec mix = (f * b).cwiseMax(kProbFloor);
      ll += w.dot(mix.array().log().matrix());
      if (grad) gb += f.transpose() * w.cwiseQuotient(mix);
    }
    if (n.size() > 0) {
      const Vec q = p * b;
      for (Eigen::Index j = 0; j < q.size(); ++j) {
        if (n(j) <= 0.0) continue;
        const double qj = std::max(q(j), kProbFloor);
        ll += n(j) * std::log(qj);
        if (grad) gb += (n(j) / qj) * p.row(j).transpose();
      }
    }
    if (grad) {
      const Vec gz = (b.array() * (gb.array() - b.dot(gb))).matrix();
      *grad = -scale * gz.head(k - 1);
    }
    return -ll * scale;
  };
  BrightnessFit out;
  if (k == 1) {
    out.b = Vec::Ones(1);
    out.ll = -obj(Vec(), nullptr) / scale;
    return out;
  }
  auto res = detail::minimize_bfgs(obj, logits_from(start), 0.5, 1e-10, 2000);
  out.b = softmax(full_logits(res.x));
  out.ll = -res.value / scale;
  return out;
}

}  // namespace

SensingEstimate brightness_pre_estimate(const Positions& di, const Positions& r) {
  const auto k = r.rows();
  if (k < 1) throw InvalidArgument("need at least one emitter position");
  SensingEstimate est;
  const Vec uniform = Vec::Constant(k, 1.0 / static_cast<double>(k));
  if (di.rows() == 0) {
    est.pre_estimate = uniform;
    est.brightnesses = uniform;
    est.no_di_photons = true;
    return est;
  }
  const ComponentDensities cd = component_densities(bin_detector(di), r);
  const BrightnessFit fit = fit_brightness(cd.f, cd.w, Mat(), Vec(), uniform);
  est.pre_estimate = fit.b;
  est.brightnesses = fit.b;
  est.log_likelihood = fit.ll + cd.offset;
  return est;
}

SensingEstimate estimate_brightness_mle(const Positions& di, const Vec& ykl_counts, const Positions& r,
                                        const YklMeasurement& m) {
  const auto k = r.rows();
  if (ykl_counts.size() != k + 1) throw InvalidArgument("YKL counts need K+1 entries (bucket last)");
  SensingEstimate est = brightness_pre_estimate(di, r);
  const Vec n = ykl_counts.head(k);
  if (!(n.sum() > 0.0)) {
    est.bucket_only = ykl_counts(k) > 0.0;
    return est;
  }
  const Mat p = ykl_overlap_matrix(m, r);
  ComponentDensities cd;
  if (di.rows() > 0) cd = component_densities(bin_detector(di), r);
  else cd.f.resize(0, k);

  // the likelihood is concave in b; start from the pre-estimate pulled off the boundary
  Vec start = 0.9 * est.pre_estimate + 0.1 * Vec::Constant(k, 1.0 / static_cast<double>(k));
  BrightnessFit fit = fit_brightness(cd.f, cd.w, p, n, start);
  est.brightnesses = fit.b;
  est.log_likelihood = fit.ll + cd.offset;
  return est;
}

std::vector<int> align_permutation(const Positions& r_true, const Positions& r_est) {
  const int k = static_cast<int>(r_true.rows());
  if (r_est.rows() != k) throw InvalidArgument("position sets differ in size");
  Mat cost(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) cost(i, j) = (r_true.row(i) - r_est.row(j)).norm();

  std::vector<int> perm(static_cast<size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  if (k <= 8) {
    std::vector<int> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (int i = 0; i < k; ++i) c += cost(i, perm[static_cast<size_t>(i)]);
      if (c < best_cost - 1e-15) {
        best_cost = c;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }

  // Hungarian algorithm (rows = true, columns = estimates), O(k^3)
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(k) + 1, 0.0), v(static_cast<size_t>(k) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(k) + 1, 0), way(static_cast<size_t>(k) + 1, 0);
  for (int i = 1; i <= k; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(k) + 1, inf);
    std::vector<char> used(static_cast<size_t>(k) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= k; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= k; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= k; ++j) perm[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
  return perm;
}

Positions apply_permutation(const Positions& r, const std::vector<int>& perm) {
  Positions out(r.rows(), 2);
  for (Eigen::Index i = 0; i < r.rows(); ++i) out.row(i) = r.row(perm[static_cast<size_t>(i)]);
  return out;
}

Vec apply_permutation(const Vec& b, const std::vector<int>& perm) {
  Vec out(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) out(i) = b(perm[static_cast<size_t>(i)]);
  return out;
}

double localization_error(const Positions& r_true, const Positions& r_est) {
  if (r_true.rows() != r_est.rows()) throw InvalidArgument("position sets differ in size");
  const double dmin = min_pairwise_separation(r_true);
  return (r_true - r_est).rowwise().norm().mean() / dmin;
}

double brightness_error(const Vec& b_true, const Vec& b_est) {
  if (b_true.size() != b_est.size()) throw InvalidArgument("brightness vectors differ in length");
  return 0.5 * (b_true - b_est).cwiseAbs().sum();
}

ErrorCorrelation error_correlation(const std::vector<double>& er, const std::vector<double>& eb) {
  if (er.size() != eb.size()) throw InvalidArgument("sample vectors differ in length");
  if (er.size() < 3) throw InvalidArgument("correlation needs at least three samples");
  const auto n = static_cast<double>(er.size());
  const double mr = std::accumulate(er.begin(), er.end(), 0.0) / n;
  const double mb = std::accumulate(eb.begin(), eb.end(), 0.0) / n;
  double srr = 0.0, sbb = 0.0, srb = 0.0;
  for (size_t i = 0; i < er.size(); ++i) {
    srr += (er[i] - mr) * (er[i] - mr);
    sbb += (eb[i] - mb) * (eb[i] - mb);
    srb += (er[i] - mr) * (eb[i] - mb);
  }
  if (srr <= 0.0 || sbb <= 0.0) throw InvalidArgument("correlation undefined for zero-variance samples");
  return {srb / std::sqrt(srr * sbb), srb / srr};
}

}  // namespace nvspade
