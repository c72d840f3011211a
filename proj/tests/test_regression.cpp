#include <doctest.h>

#include <cmath>
#include <numeric>

#include "nowcast/error.hpp"
#include "nowcast/regression.hpp"
#include "nowcast/rng.hpp"
#include "oracles.hpp"

using namespace nowcast;
using regression::Matrix;

namespace {

Matrix matrix_from(const std::vector<std::vector<double>>& columns) {
  const std::size_t rows = columns.empty() ? 0 : columns[0].size();
  Matrix m(rows, columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (std::size_t r = 0; r < rows; ++r) m.at(r, c) = columns[c][r];
  return m;
}

std::pair<Matrix, std::vector<double>> random_instance(rng::Xoshiro256ss& gen, std::size_t n,
                                                       std::size_t p, double noise_sd) {
  Matrix x(n, p);
  std::vector<double> beta(p);
  for (double& b : beta) b = gen.uniform(-3.0, 3.0);
  std::vector<double> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    double value = 1.5;  // intercept
    for (std::size_t c = 0; c < p; ++c) {
      x.at(r, c) = gen.uniform(-5.0, 5.0);
      value += beta[c] * x.at(r, c);
    }
    y[r] = value + gen.normal(0.0, noise_sd);
  }
  return {std::move(x), std::move(y)};
}

}  // namespace

TEST_CASE("a noiseless line is fit exactly") {
  const Matrix x = matrix_from({{0, 1, 2}});
  const std::vector<double> y = {1, 3, 5};
  const auto fit = regression::ols_fit(x, y, {"x"});
  CHECK(fit.coefficients[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a constant response is flagged with zero slopes and R² = 0") {
  const Matrix x = matrix_from({{0, 1, 2, 3, 4}});
  const std::vector<double> y(5, 7.5);
  const auto fit = regression::ols_fit(x, y);
  CHECK(fit.zero_variance_y);
  CHECK(fit.r2 == 0.0);
  CHECK(fit.coefficients[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(7.5).epsilon(1e-12));
}

TEST_CASE("coefficients, errors and p-values match the normal-equations oracle") {
  rng::Xoshiro256ss gen(12);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 30 + gen.bounded(80);
    const std::size_t p = 1 + gen.bounded(4);
    auto [x, y] = random_instance(gen, n, p, 0.8);
    const auto fit = regression::ols_fit(x, y);
    const auto ref = oracle::ols_normal_equations(x, y);
    CHECK(std::fabs(fit.intercept - ref.beta[0]) < 1e-8);
    CHECK(std::fabs(fit.intercept_std_error - ref.se[0]) < 1e-8);
    for (std::size_t c = 0; c < p; ++c) {
      CHECK(std::fabs(fit.coefficients[c] - ref.beta[c + 1]) < 1e-8);
      CHECK(std::fabs(fit.std_errors[c] - ref.se[c + 1]) < 1e-8);
      CHECK(std::fabs(fit.p_values[c] - ref.p_values[c + 1]) < 1e-8);
    }
    CHECK(std::fabs(fit.r2 - ref.r2) < 1e-10);

    double residual_sum = std::accumulate(fit.residuals.begin(), fit.residuals.end(), 0.0);
    CHECK(std::fabs(residual_sum) < 1e-8);
  }
}

TEST_CASE("exactly collinear designs fail naming the dependent columns") {
  rng::Xoshiro256ss gen(4);
  std::vector<double> base(40), y(40);
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = gen.uniform(0.0, 10.0);
    y[i] = 2.0 * base[i] + gen.normal(0.0, 0.1);
  }
  std::vector<double> doubled(base);
  for (double& v : doubled) v *= 2.0;
  const Matrix x = matrix_from({base, doubled});
  try {
    regression::ols_fit(x, y, {"alpha", "beta"});
    FAIL("expected rank-deficiency error");
  } catch (const ValidationError& e) {
    const std::string message = e.what();
    CHECK(message.find("rank deficient") != std::string::npos);
    const bool names_column = message.find("alpha") != std::string::npos ||
                              message.find("beta") != std::string::npos;
    CHECK(names_column);
  }
}

TEST_CASE("adding a pure-noise regressor never lowers in-sample R²") {
  rng::Xoshiro256ss gen(33);
  auto [x, y] = random_instance(gen, 60, 2, 1.0);
  const double base_r2 = regression::ols_fit(x, y).r2;
  Matrix wider(x.rows(), 3);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    wider.at(r, 0) = x.at(r, 0);
    wider.at(r, 1) = x.at(r, 1);
    wider.at(r, 2) = gen.normal(0.0, 1.0);
  }
  CHECK(regression::ols_fit(wider, y).r2 >= base_r2 - 1e-12);
}

TEST_CASE("variance inflation flags near-duplicate regressors") {
  rng::Xoshiro256ss gen(9);
  std::vector<double> a(50), near(50), independent(50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = gen.uniform(0.0, 1.0);
    near[i] = a[i] + gen.normal(0.0, 0.01);
    independent[i] = gen.uniform(0.0, 1.0);
  }
  const auto vifs = regression::variance_inflation(matrix_from({a, near, independent}));
  CHECK(vifs[0] > 10.0);
  CHECK(vifs[1] > 10.0);
  CHECK(vifs[2] < 2.0);
}

TEST_CASE("importance shares: base cases and invariances") {
  rng::Xoshiro256ss gen(21);

  SUBCASE("a single regressor takes the whole share") {
    auto [x, y] = random_instance(gen, 40, 1, 0.5);
    const auto shares = regression::lmg(x, y);
    CHECK(shares.shares[0] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("orthogonal centered regressors split by marginal R²") {
    // +-1 design: orthogonal and centered by construction
    const std::size_t n = 64;
    std::vector<double> a(n), b(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = (i & 1) ? 1.0 : -1.0;
      b[i] = (i & 2) ? 1.0 : -1.0;
      y[i] = 2.0 * a[i] + 1.0 * b[i] + std::sin(double(i));
    }
    const Matrix x = matrix_from({a, b});
    const auto shares = regression::lmg(x, y);
    const double r2_a = regression::ols_fit(matrix_from({a}), y).r2;
    const double r2_b = regression::ols_fit(matrix_from({b}), y).r2;
    CHECK(shares.shares[0] == doctest::Approx(r2_a / (r2_a + r2_b)).epsilon(1e-6));
    CHECK(shares.shares[1] == doctest::Approx(r2_b / (r2_a + r2_b)).epsilon(1e-6));
  }

  SUBCASE("near-duplicate regressors share importance almost equally") {
    const std::size_t n = 200;
    std::vector<double> a(n), near(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = gen.uniform(-2.0, 2.0);
      near[i] = a[i] + gen.normal(0.0, 1e-3);
      y[i] = 3.0 * a[i] + gen.normal(0.0, 0.4);
    }
    const auto shares = regression::lmg(matrix_from({a, near}), y);
    CHECK(std::fabs(shares.shares[0] - shares.shares[1]) < 0.02);
  }

  SUBCASE("shares sum to one and survive positive rescaling") {
    auto [x, y] = random_instance(gen, 80, 4, 1.0);
    const auto shares = regression::lmg(x, y);
    CHECK(std::accumulate(shares.shares.begin(), shares.shares.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-9));
    for (const double s : shares.shares) CHECK(s >= 0.0);

    Matrix scaled = x;
    for (std::size_t r = 0; r < x.rows(); ++r) scaled.at(r, 2) = x.at(r, 2) * 1000.0;
    const auto rescaled = regression::lmg(scaled, y);
    for (std::size_t j = 0; j < shares.shares.size(); ++j)
      CHECK(std::fabs(shares.shares[j] - rescaled.shares[j]) < 1e-9);
  }

  SUBCASE("enumeration matches the factorial-order brute force") {
    auto [x, y] = random_instance(gen, 60, 4, 0.7);
    const auto shares = regression::lmg(x, y);
    const auto brute = oracle::lmg_bruteforce(x, std::vector<double>(y.begin(), y.end()));
    for (std::size_t j = 0; j < shares.shares.size(); ++j)
      CHECK(std::fabs(shares.shares[j] - brute[j]) < 1e-10);
  }

  SUBCASE("more than ten regressors is rejected toward sampling mode") {
    Matrix wide(40, 11);
    rng::Xoshiro256ss g2(5);
    std::vector<double> y(40);
    for (std::size_t r = 0; r < 40; ++r) {
      y[r] = g2.normal(0.0, 1.0);
      for (std::size_t c = 0; c < 11; ++c) wide.at(r, c) = g2.normal(0.0, 1.0);
    }
    CHECK_THROWS_AS(regression::lmg(wide, y), ValidationError);
  }
}

TEST_CASE("cross-validation behaves on exact, repeated and reweighted runs") {
  rng::Xoshiro256ss gen(77);

  SUBCASE("a noiseless linear response validates with zero error") {
    auto [x, y] = random_instance(gen, 50, 3, 0.0);
    const auto report = regression::cross_validate(x, y, 50, 0.6, 11, 1);
    REQUIRE(report.experiments.size() == 50);
    for (const auto& e : report.experiments) {
      CHECK(e.rmse < 1e-9);
      CHECK(e.r2 > 1.0 - 1e-9);
    }
  }

  SUBCASE("the report has exactly the configured experiment count") {
    auto [x, y] = random_instance(gen, 40, 2, 0.5);
    CHECK(regression::cross_validate(x, y, 137, 0.6, 5, 1).experiments.size() == 137);
  }

  SUBCASE("a fixed seed reproduces the report bit for bit, at any worker count") {
    auto [x, y] = random_instance(gen, 45, 3, 0.6);
    const auto a = regression::cross_validate(x, y, 64, 0.6, 99, 1);
    const auto b = regression::cross_validate(x, y, 64, 0.6, 99, 3);
    for (std::size_t e = 0; e < a.experiments.size(); ++e) {
      CHECK(a.experiments[e].r2 == b.experiments[e].r2);
      CHECK(a.experiments[e].rmse == b.experiments[e].rmse);
      CHECK(a.experiments[e].cv_rmse == b.experiments[e].cv_rmse);
    }
    for (std::size_t i = 0; i < a.rel_err_sum.size(); ++i) {
      CHECK(a.rel_err_sum[i] == b.rel_err_sum[i]);
      CHECK(a.rel_err_count[i] == b.rel_err_count[i]);
    }
  }

  SUBCASE("zero-mean test folds are tallied as undefined CV(RMSE)") {
    // y = ±1 balanced: some folds have exactly zero mean
    const std::size_t n = 20;
    Matrix x(n, 1);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x.at(i, 0) = double(i);
      y[i] = (i % 2 == 0) ? 1.0 : -1.0;
    }
    const auto report = regression::cross_validate(x, y, 200, 0.6, 123, 1);
    std::size_t undefined = 0;
    for (const auto& e : report.experiments)
      if (!e.cv_rmse_defined) ++undefined;
    CHECK(undefined == report.undefined_cv_count);
    CHECK(undefined > 0);
  }

  SUBCASE("folds too small for the design are rejected") {
    auto [x, y] = random_instance(gen, 10, 3, 0.5);
    CHECK_THROWS_AS(regression::cross_validate(x, y, 10, 0.9, 1, 1), ValidationError);
  }
}
