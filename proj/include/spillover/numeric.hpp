#pragma once

#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "spillover/error.hpp"

namespace spillover {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

/// Upper tail probability of a chi-square variate.
inline double chi_square_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>{dof}, x));
}

inline double mean(std::span<const double> x) {
  if (x.empty()) throw DataError("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample variance with divisor n - 1.
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw DataError("variance needs at least two observations");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

inline double sample_sd(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

inline Eigen::Map<const Eigen::VectorXd> as_eigen(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// Ordinary least squares solved by column-pivoted Householder QR.
struct LeastSquaresFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inverse;  // (X'X)^{-1} from R^{-1} R^{-T}
  double rss = 0.0;
  Eigen::Index rank = 0;

  /// Classical homoskedastic standard errors with divisor n - k.
  [[nodiscard]] Eigen::VectorXd standard_errors() const {
    const auto n = residuals.size();
    const auto k = coef.size();
    const double s2 = rss / static_cast<double>(n - k);
    return (xtx_inverse.diagonal() * s2).cwiseSqrt();
  }
};

inline LeastSquaresFit least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const std::string& context = "least squares") {
  if (x.rows() != y.size()) throw DataError(context + ": row count mismatch");
  if (x.rows() < x.cols()) throw DataError(context + ": fewer observations than regressors");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) throw NumericalError(context + ": regressor matrix is rank deficient");
  LeastSquaresFit fit;
  fit.coef = qr.solve(y);
  fit.residuals = y - x * fit.coef;
  fit.rss = fit.residuals.squaredNorm();
  fit.rank = qr.rank();
  const Eigen::Index k = x.cols();
  Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd inv_perm = r_inv * r_inv.transpose();
  fit.xtx_inverse = qr.colsPermutation() * inv_perm * qr.colsPermutation().transpose();
  return fit;
}

/// Squared Pearson correlation; zero when either side is constant.
inline double squared_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("squared_correlation: length mismatch");
  if (a.size() < 2) return 0.0;
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return (sab * sab) / (saa * sbb);
}

}  // namespace spillover
