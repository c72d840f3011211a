#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace nowcast::regression {

/// Dense row-major matrix; regressor columns only, the intercept is implicit.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_.data() + r * cols_, cols_);
  }

  Matrix select_columns(std::span<const std::size_t> columns) const;
  Matrix select_rows(std::span<const std::size_t> rows) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct RegressionFit {
  std::vector<std::string> names;  // regressors, same order as X columns
  std::vector<double> coefficients;
  double intercept = 0.0;
  std::vector<double> std_errors;
  double intercept_std_error = 0.0;
  std::vector<double> p_values;
  double intercept_p_value = 1.0;
  double r2 = 0.0;
  double adjusted_r2 = 0.0;
  double sigma2 = 0.0;  // residual variance estimate
  std::vector<double> residuals;
  std::size_t n = 0;
  std::size_t p = 0;
  bool zero_variance_y = false;

  double predict(std::span<const double> x) const;
};

/// Least squares with an intercept, solved by column-pivoted Householder QR.
/// Standard errors from the classical homoskedastic covariance; two-sided
/// t-test p-values with n-p-1 degrees of freedom. Rank deficiency (pivot
/// below 1e-10 relative) raises ValidationError naming the dependent
/// columns. A constant y is flagged and reported with R² = 0.
RegressionFit ols_fit(const Matrix& x, std::span<const double> y,
                      std::vector<std::string> names = {});

/// Variance inflation factors (1/(1-R²_j) of each regressor on the rest).
std::vector<double> variance_inflation(const Matrix& x);

struct LmgDecomposition {
  std::vector<double> shares;  // per regressor, sum to 1
};

/// Exact averaged-over-orderings R² decomposition, memoized over the 2^p
/// regressor subsets. p ≤ 10.
LmgDecomposition lmg(const Matrix& x, std::span<const double> y);

struct CvExperiment {
  double r2 = 0.0;  // adjusted R² of the training fit
  double rmse = 0.0;
  double cv_rmse = 0.0;
  bool cv_rmse_defined = true;
};

struct CvReport {
  std::vector<CvExperiment> experiments;
  std::vector<double> rel_err_sum;     // per input row, over test appearances
  std::vector<uint32_t> rel_err_count; // appearances with y ≠ 0
  std::size_t undefined_cv_count = 0;

  double mean_rel_err(std::size_t row) const {
    return rel_err_count[row] > 0 ? rel_err_sum[row] / double(rel_err_count[row])
                                  : std::numeric_limits<double>::quiet_NaN();
  }
};

/// Repeated random train/test splits; fit on the training fraction,
/// evaluate RMSE and CV(RMSE) on the held-out rows. Per-experiment seeds
/// derive from `seed`, so any worker count gives the same report.
CvReport cross_validate(const Matrix& x, std::span<const double> y,
                        std::size_t repetitions, double train_fraction,
                        uint64_t seed, int workers = 1);

}  // namespace nowcast::regression
