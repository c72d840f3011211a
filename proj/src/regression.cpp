#include "nowcast/regression.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "nowcast/error.hpp"
#include "nowcast/kernels.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/stats.hpp"

namespace nowcast::regression {

Matrix Matrix::select_columns(std::span<const std::size_t> columns) const {
  Matrix out(rows_, columns.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t j = 0; j < columns.size(); ++j) out.at(r, j) = at(r, columns[j]);
  return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> rows) const {
  Matrix out(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < cols_; ++c) out.at(i, c) = at(rows[i], c);
  return out;
}

double RegressionFit::predict(std::span<const double> x) const {
  double v = intercept;
  for (std::size_t j = 0; j < coefficients.size() && j < x.size(); ++j)
    v += coefficients[j] * x[j];
  return v;
}

namespace {

constexpr double kPivotTolerance = 1e-10;

std::span<double> tail(std::vector<double>& v, std::size_t from) {
  return std::span<double>(v.data() + from, v.size() - from);
}

/// Column-pivoted Householder QR of the augmented design [1 | X], kept
/// column-major so the reflector updates run through the reduction kernels.
struct QrResult {
  std::size_t m = 0;                       // columns of the augmented design
  std::vector<std::vector<double>> cols;   // below-diagonal: reflector vectors
  std::vector<double> diag;                // R diagonal
  std::vector<double> qty;                 // Qᵀ y
  std::vector<std::size_t> perm;           // column permutation
};

QrResult householder_qr(const Matrix& x, std::span<const double> y,
                        const std::vector<std::string>& names) {
  const std::size_t n = x.rows();
  const std::size_t m = x.cols() + 1;

  QrResult qr;
  qr.m = m;
  qr.cols.assign(m, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    qr.cols[0][i] = 1.0;
    for (std::size_t j = 0; j < x.cols(); ++j) qr.cols[j + 1][i] = x.at(i, j);
  }
  qr.qty.assign(y.begin(), y.end());
  qr.perm.resize(m);
  std::iota(qr.perm.begin(), qr.perm.end(), (std::size_t)0);
  qr.diag.assign(m, 0.0);

  double initial_max_norm = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    initial_max_norm = std::max(initial_max_norm, std::sqrt(simd::dot(qr.cols[j], qr.cols[j])));

  for (std::size_t k = 0; k < m; ++k) {
    // exact subcolumn norms; m is small so this costs little and avoids the
    // classic downdating cancellation
    std::size_t pivot = k;
    double best = -1.0;
    for (std::size_t j = k; j < m; ++j) {
      const double norm2 = simd::dot(tail(qr.cols[j], k), tail(qr.cols[j], k));
      if (norm2 > best) {
        best = norm2;
        pivot = j;
      }
    }
    const double norm = std::sqrt(std::max(0.0, best));
    if (norm <= kPivotTolerance * initial_max_norm) {
      std::string dependent;
      for (std::size_t j = k; j < m; ++j) {
        if (!dependent.empty()) dependent += ", ";
        const std::size_t original = qr.perm[j];
        dependent += original == 0 ? "intercept" : names[original - 1];
      }
      throw ValidationError("rank deficient design, dependent columns: " + dependent);
    }
    if (pivot != k) {
      std::swap(qr.cols[pivot], qr.cols[k]);
      std::swap(qr.perm[pivot], qr.perm[k]);
    }

    std::vector<double>& col = qr.cols[k];
    const double alpha = col[k] >= 0.0 ? -norm : norm;
    col[k] -= alpha;  // col[k..n) now holds the reflector v
    qr.diag[k] = alpha;
    const double vtv = simd::dot(tail(col, k), tail(col, k));
    if (vtv > 0.0) {
      for (std::size_t j = k + 1; j < m; ++j) {
        const double c = 2.0 * simd::dot(tail(col, k), tail(qr.cols[j], k)) / vtv;
        simd::axpy(-c, tail(col, k), tail(qr.cols[j], k));
      }
      const double c = 2.0 * simd::dot(tail(col, k), tail(qr.qty, k)) / vtv;
      simd::axpy(-c, tail(col, k), tail(qr.qty, k));
    }
  }
  return qr;
}

}  // namespace

RegressionFit ols_fit(const Matrix& x, std::span<const double> y,
                      std::vector<std::string> names) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  const std::size_t m = p + 1;
  if (y.size() != n) throw ValidationError("ols_fit: X/y size mismatch");
  if (n <= m) throw ValidationError("ols_fit: need n > p + 1");
  if (names.empty())
    for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));

  QrResult qr = householder_qr(x, y, names);

  // back substitution: R beta_perm = (Qᵀy)[0..m)
  std::vector<double> beta_perm(m, 0.0);
  for (std::size_t ik = m; ik-- > 0;) {
    double v = qr.qty[ik];
    for (std::size_t j = ik + 1; j < m; ++j) v -= qr.cols[j][ik] * beta_perm[j];
    beta_perm[ik] = v / qr.diag[ik];
  }
  std::vector<double> beta(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) beta[qr.perm[j]] = beta_perm[j];

  RegressionFit fit;
  fit.names = std::move(names);
  fit.n = n;
  fit.p = p;
  fit.intercept = beta[0];
  fit.coefficients.assign(beta.begin() + 1, beta.end());

  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.residuals[i] = y[i] - fit.predict(x.row(i));
  const double rss = simd::dot(fit.residuals, fit.residuals);
  const double dof = double(n - m);
  fit.sigma2 = rss / dof;

  // (XᵀX)⁻¹ = P R⁻¹ R⁻ᵀ Pᵀ
  std::vector<std::vector<double>> rinv(m, std::vector<double>(m, 0.0));
  for (std::size_t j = 0; j < m; ++j) {
    rinv[j][j] = 1.0 / qr.diag[j];
    for (std::size_t i = j; i-- > 0;) {
      // R(i,t) for i < t sits above the reflector storage in column t
      double s = 0.0;
      for (std::size_t t = i + 1; t <= j; ++t) s += qr.cols[t][i] * rinv[t][j];
      rinv[i][j] = -s / qr.diag[i];
    }
  }
  fit.std_errors.resize(p);
  for (std::size_t j = 0; j < m; ++j) {
    double c_jj = 0.0;
    for (std::size_t t = j; t < m; ++t) c_jj += rinv[j][t] * rinv[j][t];
    const double se = std::sqrt(std::max(0.0, fit.sigma2 * c_jj));
    const std::size_t original = qr.perm[j];
    if (original == 0)
      fit.intercept_std_error = se;
    else
      fit.std_errors[original - 1] = se;
  }

  const double mean_y = simd::sum(y) / double(n);
  const simd::Moments2 mom = simd::centered_moments(y, y, mean_y, mean_y);
  const double tss = mom.sxx;
  if (tss <= 0.0) {
    fit.zero_variance_y = true;
    fit.r2 = 0.0;
    fit.adjusted_r2 = 0.0;
  } else {
    fit.r2 = 1.0 - rss / tss;
    if (fit.r2 < 0.0) fit.r2 = 0.0;
    if (fit.r2 > 1.0) fit.r2 = 1.0;
    fit.adjusted_r2 = 1.0 - (1.0 - fit.r2) * double(n - 1) / dof;
  }

  auto p_value = [&](double coef, double se) {
    if (se <= 0.0) return coef == 0.0 ? 1.0 : 0.0;
    return stats::student_t_two_sided(coef / se, dof);
  };
  fit.p_values.resize(p);
  for (std::size_t j = 0; j < p; ++j) fit.p_values[j] = p_value(fit.coefficients[j], fit.std_errors[j]);
  fit.intercept_p_value = p_value(fit.intercept, fit.intercept_std_error);
  return fit;
}

std::vector<double> variance_inflation(const Matrix& x) {
  const std::size_t p = x.cols();
  std::vector<double> out(p, 1.0);
  if (p < 2) return out;
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<std::size_t> others;
    std::vector<double> target(x.rows());
    for (std::size_t c = 0; c < p; ++c)
      if (c != j) others.push_back(c);
    for (std::size_t r = 0; r < x.rows(); ++r) target[r] = x.at(r, j);
    const Matrix sub = x.select_columns(others);
    const RegressionFit fit = ols_fit(sub, target);
    const double r2 = std::min(fit.r2, 1.0 - 1e-12);
    out[j] = 1.0 / (1.0 - r2);
  }
  return out;
}

LmgDecomposition lmg(const Matrix& x, std::span<const double> y) {
  const std::size_t p = x.cols();
  if (p < 1) throw ValidationError("lmg: need at least one regressor");
  if (p > 10)
    throw ValidationError(
        "lmg: exact enumeration supports at most 10 regressors; use a sampling "
        "approximation for wider designs");

  const std::size_t masks = std::size_t(1) << p;
  std::vector<double> r2(masks, 0.0);
  for (std::size_t mask = 1; mask < masks; ++mask) {
    std::vector<std::size_t> columns;
    for (std::size_t j = 0; j < p; ++j)
      if (mask & (std::size_t(1) << j)) columns.push_back(j);
    const Matrix sub = x.select_columns(columns);
    r2[mask] = ols_fit(sub, y).r2;
  }
  const double full = r2[masks - 1];
  if (full <= 0.0) throw ValidationError("lmg: degenerate model, full R² is zero");

  // weight of a subset of size s in the average over orderings
  std::vector<double> factorial(p + 1, 1.0);
  for (std::size_t i = 1; i <= p; ++i) factorial[i] = factorial[i - 1] * double(i);
  std::vector<double> weight(p, 0.0);
  for (std::size_t s = 0; s < p; ++s)
    weight[s] = factorial[s] * factorial[p - s - 1] / factorial[p];

  LmgDecomposition out;
  out.shares.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const std::size_t bit = std::size_t(1) << j;
    double total = 0.0;
    for (std::size_t mask = 0; mask < masks; ++mask) {
      if (mask & bit) continue;
      const std::size_t s = std::size_t(std::popcount(mask));
      total += weight[s] * (r2[mask | bit] - r2[mask]);
    }
    out.shares[j] = std::max(0.0, total / full);
  }
  return out;
}

CvReport cross_validate(const Matrix& x, std::span<const double> y,
                        std::size_t repetitions, double train_fraction,
                        uint64_t seed, int workers) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (repetitions < 1) throw ValidationError("cross_validate: repetitions must be ≥ 1");
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw ValidationError("cross_validate: train_fraction must be in (0, 1)");
  const std::size_t n_train = std::size_t(std::llround(train_fraction * double(n)));
  const std::size_t n_test = n - n_train;
  if (n_train <= p + 1 || n_test < p + 2)
    throw ValidationError("cross_validate: folds too small for the design");

  CvReport report;
  report.experiments.resize(repetitions);
  report.rel_err_sum.assign(n, 0.0);
  report.rel_err_count.assign(n, 0);

  const std::size_t chunk = 16;
  const std::size_t chunks = (repetitions + chunk - 1) / chunk;
  std::vector<std::vector<double>> chunk_rel_sum(chunks);
  std::vector<std::vector<uint32_t>> chunk_rel_cnt(chunks);
  std::vector<std::size_t> chunk_undef(chunks, 0);

  par::parallel_chunks(repetitions, chunk, workers,
                       [&](std::size_t begin, std::size_t end, std::size_t c) {
    std::vector<double> rel_sum(n, 0.0);
    std::vector<uint32_t> rel_cnt(n, 0);
    std::size_t undefined = 0;
    for (std::size_t e = begin; e < end; ++e) {
      rng::Xoshiro256ss gen(rng::derive_seed(seed, e));
      std::vector<uint32_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0u);
      gen.shuffle(perm);

      std::vector<std::size_t> train(perm.begin(), perm.begin() + std::ptrdiff_t(n_train));
      const Matrix x_train = x.select_rows(train);
      std::vector<double> y_train(n_train);
      for (std::size_t i = 0; i < n_train; ++i) y_train[i] = y[train[i]];
      const RegressionFit fit = ols_fit(x_train, y_train);

      double sq_sum = 0.0;
      double y_sum = 0.0;
      for (std::size_t i = n_train; i < n; ++i) {
        const std::size_t row = perm[i];
        const double predicted = fit.predict(x.row(row));
        const double err = predicted - y[row];
        sq_sum += err * err;
        y_sum += y[row];
        if (y[row] != 0.0) {
          rel_sum[row] += err / y[row];
          ++rel_cnt[row];
        }
      }
      CvExperiment& ex = report.experiments[e];
      ex.r2 = fit.adjusted_r2;
      ex.rmse = std::sqrt(sq_sum / double(n_test));
      const double mean_test = y_sum / double(n_test);
      if (mean_test == 0.0) {
        ex.cv_rmse_defined = false;
        ex.cv_rmse = std::numeric_limits<double>::quiet_NaN();
        ++undefined;
      } else {
        ex.cv_rmse = ex.rmse / mean_test;
      }
    }
    chunk_rel_sum[c] = std::move(rel_sum);
    chunk_rel_cnt[c] = std::move(rel_cnt);
    chunk_undef[c] = undefined;
  });

  // fold partial accumulators in chunk order
  for (std::size_t c = 0; c < chunks; ++c) {
    if (chunk_rel_sum[c].empty()) continue;
    for (std::size_t i = 0; i < n; ++i) {
      report.rel_err_sum[i] += chunk_rel_sum[c][i];
      report.rel_err_count[i] += chunk_rel_cnt[c][i];
    }
    report.undefined_cv_count += chunk_undef[c];
  }
  return report;
}

}  // namespace nowcast::regression
