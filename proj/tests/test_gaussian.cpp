// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "tpmove/error.hpp"
#include "tpmove/gaussian.hpp"

using namespace tpmove;
using namespace testing;

namespace {

// Dense-inverse reference for a product of Gaussians.
Gaussian product_oracle(const std::vector<Gaussian>& fs, const std::vector<double>& c = {}) {
  const Index d = fs.front().dim();
  MatrixXd L = MatrixXd::Zero(d, d);
  VectorXd eta = VectorXd::Zero(d);
  for (std::size_t j = 0; j < fs.size(); ++j) {
    const double w = c.empty() ? 1.0 : c[j];
    const MatrixXd Lj = w * fs[j].covariance.inverse();
    L += Lj;
    eta += Lj * fs[j].mean;
  }
  const MatrixXd S = L.inverse();
  return {S * eta, S};
}

double log_density_oracle(const Gaussian& g, const VectorXd& x) {
  const double d = static_cast<double>(g.dim());
  const VectorXd r = x - g.mean;
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + std::log(g.covariance.determinant()) +
                 r.dot(g.covariance.inverse() * r));
}

}  // namespace

TEST_CASE("log density matches the closed form") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const Index d = 1 + i % 5;
    const Gaussian g = random_gaussian(rng, d);
    const VectorXd x = random_vector(rng, d);
    CHECK(g.log_density(x) == doctest::Approx(log_density_oracle(g, x)).epsilon(1e-10));
  }
}

TEST_CASE("standard normal density at the origin") {
  const Gaussian g(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  CHECK(g.log_density(VectorXd::Zero(2)) == doctest::Approx(-std::log(2.0 * std::numbers::pi)));
}

TEST_CASE("product of two 1-D Gaussians") {
  // N(0,1) x N(2,1) -> N(1, 0.5)
  std::vector<Gaussian> fs{{VectorXd::Constant(1, 0.0), MatrixXd::Constant(1, 1, 1.0)},
                           {VectorXd::Constant(1, 2.0), MatrixXd::Constant(1, 1, 1.0)}};
  const Gaussian p = gaussian_product(fs);
  CHECK(p.mean(0) == doctest::Approx(1.0));
  CHECK(p.covariance(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("product of Gaussians: precision additivity, permutation invariance, stationarity") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const Index d = 1 + trial % 6;
    const Index P = 1 + (trial / 6) % 5;
    std::vector<Gaussian> fs;
    for (Index j = 0; j < P; ++j) fs.push_back(random_gaussian(rng, d));
    const Gaussian p = gaussian_product(fs);
    const Gaussian ref = product_oracle(fs);

    MatrixXd sum_prec = MatrixXd::Zero(d, d);
    VectorXd grad = VectorXd::Zero(d);
    for (const auto& f : fs) {
      const MatrixXd Lj = f.covariance.inverse();
      sum_prec += Lj;
      grad += 2.0 * Lj * (p.mean - f.mean);
    }
    CHECK(max_abs(p.covariance.inverse() - sum_prec) <= 1e-8 * std::max(1.0, max_abs(sum_prec)));
    CHECK(max_abs(p.mean - ref.mean) <= 1e-9 * std::max(1.0, max_abs(ref.mean)));
    CHECK(grad.norm() <= 1e-8);

    std::vector<Gaussian> shuffled = fs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const Gaussian q = gaussian_product(shuffled);
    CHECK(max_abs(q.mean - p.mean) <= 1e-12 * std::max(1.0, max_abs(p.mean)));
    CHECK(max_abs(q.covariance - p.covariance) <= 1e-12 * std::max(1.0, max_abs(p.covariance)));
  }
}

TEST_CASE("single-factor product is the factor") {
  std::mt19937_64 rng(3);
  const Gaussian g = random_gaussian(rng, 4);
  const Gaussian p = gaussian_product(std::vector<Gaussian>{g});
  CHECK(max_abs(p.mean - g.mean) < 1e-12);
  CHECK(max_abs(p.covariance - g.covariance) < 1e-12);
}

TEST_CASE("confidence-weighted product") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 1 + trial % 4;
    std::vector<Gaussian> fs{random_gaussian(rng, d), random_gaussian(rng, d), random_gaussian(rng, d)};
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> c{u(rng), u(rng), u(rng)};
    const Gaussian w = weighted_gaussian_product(fs, c);
    const Gaussian ref = product_oracle(fs, c);
    CHECK(max_abs(w.mean - ref.mean) < 1e-9 * std::max(1.0, max_abs(ref.mean)));
    CHECK(max_abs(w.covariance - ref.covariance) < 1e-9 * std::max(1.0, max_abs(ref.covariance)));

    const std::vector<double> ones(3, 1.0);
    const Gaussian a = weighted_gaussian_product(fs, ones);
    const Gaussian b = gaussian_product(fs);
    CHECK(max_abs(a.mean - b.mean) <= 1e-12);
    CHECK(max_abs(a.covariance - b.covariance) <= 1e-12);
  }
}

TEST_CASE("raising one confidence pulls the product toward that factor") {
  std::vector<Gaussian> fs{{VectorXd::Constant(1, 0.0), MatrixXd::Constant(1, 1, 1.0)},
                           {VectorXd::Constant(1, 1.0), MatrixXd::Constant(1, 1, 1.0)}};
  double prev = -1.0;
  for (double c : {0.1, 0.3, 0.6, 1.0}) {
    const std::vector<double> conf{0.1, c};
    const double m = weighted_gaussian_product(fs, conf).mean(0);
    CHECK(m > prev);
    prev = m;
  }
}

TEST_CASE("product errors") {
  CHECK_THROWS_AS(gaussian_product(std::vector<Gaussian>{}), Error);
  std::vector<Gaussian> fs{{VectorXd::Zero(2), MatrixXd::Identity(2, 2)},
                           {VectorXd::Zero(3), MatrixXd::Identity(3, 3)}};
  try {
    gaussian_product(fs);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  std::vector<Gaussian> two{{VectorXd::Zero(1), MatrixXd::Identity(1, 1)},
                            {VectorXd::Zero(1), MatrixXd::Identity(1, 1)}};
  for (double bad : {0.0, -0.5, 1.5, std::nan("")}) {
    const std::vector<double> c{1.0, bad};
    try {
      weighted_gaussian_product(two, c);
      FAIL("expected ConfidenceOutOfRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfidenceOutOfRange);
    }
  }
  const Gaussian singular(VectorXd::Zero(2), MatrixXd::Zero(2, 2));
  CHECK_THROWS_AS(singular.precision(), Error);
}

TEST_CASE("GMR on a single component equals Gaussian conditioning") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Gaussian g = random_gaussian(rng, 4);
    const GMM gmm(VectorXd::Ones(1), {g});
    const BlockSpec spec = BlockSpec::time_input(3);
    const VectorXd in = random_vector(rng, 1);
    const Gaussian c = gmr_condition(gmm, spec, in);

    const MatrixXd& S = g.covariance;
    const VectorXd mu = g.mean.tail(3) + S.block(1, 0, 3, 1) * ((in(0) - g.mean(0)) / S(0, 0));
    const MatrixXd cov = S.block(1, 1, 3, 3) - S.block(1, 0, 3, 1) * S.block(0, 1, 1, 3) / S(0, 0);
    CHECK(max_abs(c.mean - mu) < 1e-10);
    CHECK(max_abs(c.covariance - cov) < 1e-10);
  }
}

TEST_CASE("GMR moment matching on a two-component mixture") {
  // Components with zero cross-covariance: conditionals are the component
  // output blocks, weighted by the input likelihoods.
  MatrixXd S1 = MatrixXd::Identity(2, 2), S2 = MatrixXd::Identity(2, 2);
  S2(1, 1) = 4.0;
  Eigen::Vector2d m1(0.0, 1.0), m2(1.0, -2.0);
  const GMM gmm(Eigen::Vector2d(0.3, 0.7), {{m1, S1}, {m2, S2}});
  const BlockSpec spec({0}, {1});
  const double x = 0.4;
  const double l1 = 0.3 * std::exp(-0.5 * x * x), l2 = 0.7 * std::exp(-0.5 * (x - 1) * (x - 1));
  const double h1 = l1 / (l1 + l2), h2 = l2 / (l1 + l2);
  const double mean = h1 * 1.0 + h2 * -2.0;
  const double var = h1 * (1.0 + 1.0) + h2 * (4.0 + 4.0) - mean * mean;
  const Gaussian c = gmr_condition(gmm, spec, VectorXd::Constant(1, x));
  CHECK(c.mean(0) == doctest::Approx(mean).epsilon(1e-12));
  CHECK(c.covariance(0, 0) == doctest::Approx(var).epsilon(1e-12));
}

TEST_CASE("GmrConditioner agrees with gmr_condition") {
  std::mt19937_64 rng(21);
  std::vector<Gaussian> comps;
  for (int k = 0; k < 4; ++k) comps.push_back(random_gaussian(rng, 4));
  const GMM gmm(VectorXd::Constant(4, 0.25), comps);
  const BlockSpec spec = BlockSpec::time_input(3);
  const GmrConditioner cond(gmm, spec);
  for (int i = 0; i < 20; ++i) {
    const VectorXd in = random_vector(rng, 1, 2.0);
    const Gaussian a = cond.condition(in), b = gmr_condition(gmm, spec, in);
    CHECK(max_abs(a.mean - b.mean) < 1e-10);
    CHECK(max_abs(a.covariance - b.covariance) < 1e-10);
  }
}

TEST_CASE("GMR far from every component stays finite") {
  const GMM gmm(Eigen::Vector2d(0.5, 0.5),
                {{Eigen::Vector2d(0.0, 0.0), MatrixXd::Identity(2, 2) * 1e-4},
                 {Eigen::Vector2d(1.0, 1.0), MatrixXd::Identity(2, 2) * 1e-4}});
  const Gaussian c = gmr_condition(gmm, BlockSpec({0}, {1}), VectorXd::Constant(1, 50.0));
  CHECK(std::isfinite(c.mean(0)));
  CHECK(c.mean(0) == doctest::Approx(1.0));
}

namespace {

MatrixXd sample_mixture(std::mt19937_64& rng, const std::vector<Gaussian>& comps, Index n) {
  const Index d = comps.front().dim();
  MatrixXd data(n, d);
  for (Index i = 0; i < n; ++i) {
    const Gaussian& g = comps[static_cast<std::size_t>(i) % comps.size()];
    const MatrixXd L = g.covariance.llt().matrixL();
    data.row(i) = (g.mean + L * random_vector(rng, d)).transpose();
  }
  return data;
}

}  // namespace

TEST_CASE("EM log-likelihood never decreases") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Index d = 1 + static_cast<Index>(seed % 4);
    std::vector<Gaussian> truth;
    for (int k = 0; k < 3; ++k) truth.push_back({random_vector(rng, d, 3.0), random_spd(rng, d, 0.05, 0.5)});
    const MatrixXd data = sample_mixture(rng, truth, 150);
    EmOptions opt;
    opt.init = KMeansPlusPlusInit{seed};
    const EmReport rep = em_fit_report(data, 3, opt);
    for (std::size_t i = 1; i < rep.log_likelihood.size(); ++i) {
      CHECK(rep.log_likelihood[i] >= rep.log_likelihood[i - 1] - 1e-9);
    }
    CHECK(rep.gmm.weights.sum() == doctest::Approx(1.0));
    CHECK(rep.log_likelihood.back() == doctest::Approx(log_likelihood(rep.gmm, data)).epsilon(1e-9));
  }
}

TEST_CASE("unregularized EM is monotone without the safeguard") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<Gaussian> truth;
    for (int k = 0; k < 3; ++k) truth.push_back({random_vector(rng, 3, 3.0), random_spd(rng, 3, 0.2, 0.5)});
    const MatrixXd data = sample_mixture(rng, truth, 300);
    EmOptions opt;
    opt.init = KMeansPlusPlusInit{seed};
    opt.reg = 0.0;
    opt.tol = 0.0;
    opt.max_iter = 60;
    const EmReport rep = em_fit_report(data, 3, opt);
    // Plain EM is an ascent method; a discarded step can only be rounding.
    CHECK(rep.rejected_drop <= 1e-9);
    CHECK(rep.iterations >= 3);
    for (std::size_t i = 1; i < rep.log_likelihood.size(); ++i) {
      CHECK(rep.log_likelihood[i] >= rep.log_likelihood[i - 1] - 1e-9);
    }
  }
}

TEST_CASE("a rejected regularized step leaves the last accepted model") {
  MatrixXd data(200, 2);
  for (Index i = 0; i < 200; ++i) {
    const double t = i / 199.0;
    data(i, 0) = t;
    data(i, 1) = std::sin(6.0 * t);
  }
  EmOptions opt;
  opt.init = TimeBinsInit{};
  const EmReport rep = em_fit_report(data, 5, opt);
  CHECK(rep.log_likelihood.back() == doctest::Approx(log_likelihood(rep.gmm, data)).epsilon(1e-12));
}

TEST_CASE("EM recovers well separated clusters") {
  std::mt19937_64 rng(99);
  std::vector<Gaussian> truth{{Eigen::Vector2d(-5, 0), MatrixXd::Identity(2, 2) * 0.1},
                              {Eigen::Vector2d(5, 0), MatrixXd::Identity(2, 2) * 0.1}};
  const MatrixXd data = sample_mixture(rng, truth, 400);
  const GMM gmm = em_fit(data, 2);
  std::vector<double> xs{gmm.components[0].mean(0), gmm.components[1].mean(0)};
  std::sort(xs.begin(), xs.end());
  CHECK(xs[0] == doctest::Approx(-5.0).epsilon(0.02));
  CHECK(xs[1] == doctest::Approx(5.0).epsilon(0.02));
  CHECK(gmm.weights(0) == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("EM with time-bin initialization is deterministic and monotone") {
  MatrixXd data(200, 2);
  for (Index i = 0; i < 200; ++i) {
    const double t = i / 199.0;
    data(i, 0) = t;
    data(i, 1) = std::sin(6.0 * t);
  }
  EmOptions opt;
  opt.init = TimeBinsInit{};
  const EmReport a = em_fit_report(data, 5, opt), b = em_fit_report(data, 5, opt);
  CHECK(a.log_likelihood == b.log_likelihood);
  for (std::size_t i = 1; i < a.log_likelihood.size(); ++i) CHECK(a.log_likelihood[i] >= a.log_likelihood[i - 1] - 1e-9);
}

TEST_CASE("EM regularization keeps degenerate data fittable") {
  MatrixXd data = MatrixXd::Zero(30, 3);
  for (Index i = 0; i < 30; ++i) data(i, 0) = static_cast<double>(i);
  const GMM gmm = em_fit(data, 2);
  for (const auto& c : gmm.components) CHECK(c.covariance.llt().info() == Eigen::Success);
}

TEST_CASE("EM errors") {
  const MatrixXd data = MatrixXd::Random(5, 2);
  try {
    em_fit(data, 6);
    FAIL("expected KTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::KTooLarge);
  }
  try {
    em_fit(MatrixXd(0, 2), 1);
    FAIL("expected EmptyData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyData);
  }
}
