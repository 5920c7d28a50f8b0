#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dpmask/noise.hpp"
#include "test_util.hpp"

using namespace dpmask;

TEST_CASE("sample_spherical_laplace is deterministic per stream") {
  const NoiseRate rate{3.0, 4};
  RngStream a(99), b(99);
  const Vec ea = sample_spherical_laplace(rate, a);
  const Vec eb = sample_spherical_laplace(rate, b);
  CHECK(ea == eb);

  RngStream c(100);
  CHECK(sample_spherical_laplace(rate, c) != ea);
}

TEST_CASE("noise norm follows Gamma(dim, s): mean and variance") {
  // dim=2, s=25 corresponds to lambda=0.5, N=100, epsilon=1.
  const NoiseRate rate{25.0, 2};
  RngStream rng(7);
  const int draws = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const Vec eta = sample_spherical_laplace(rate, rng);
    const double nrm = testutil::norm2(eta);
    sum += nrm;
    sum_sq += nrm * nrm;
  }
  const double mean = sum / draws;
  const double var = sum_sq / draws - mean * mean;
  const double expected_mean = 2.0 / 25.0;  // dim/s = 0.08
  const double expected_var = 2.0 / (25.0 * 25.0);
  CHECK(std::abs(mean - expected_mean) <= 0.03 * expected_mean);
  CHECK(std::abs(var - expected_var) <= 0.05 * expected_var);
}

TEST_CASE("dim=1 norm matches Exponential(1) by Kolmogorov-Smirnov") {
  const NoiseRate rate{1.0, 1};
  RngStream rng(13);
  const int n = 100000;
  std::vector<double> norms(n);
  for (int i = 0; i < n; ++i) {
    norms[i] = std::abs(sample_spherical_laplace(rate, rng)[0]);
  }
  std::sort(norms.begin(), norms.end());
  double d_stat = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = 1.0 - std::exp(-norms[i]);
    d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i) / n));
    d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i + 1) / n));
  }
  // Asymptotic critical value at alpha = 0.01.
  CHECK(d_stat < 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("noise direction is uniform: mean direction vanishes") {
  const NoiseRate rate{2.0, 5};
  RngStream rng(17);
  const int draws = 100000;
  Vec mean(5, 0.0);
  for (int i = 0; i < draws; ++i) {
    const Vec eta = sample_spherical_laplace(rate, rng);
    const double nrm = testutil::norm2(eta);
    for (int j = 0; j < 5; ++j) mean[j] += eta[j] / nrm;
  }
  for (double& v : mean) v /= draws;
  CHECK(testutil::norm2(mean) < 0.02);
}

TEST_CASE("log density: zero at the origin, ratio identity exact") {
  const NoiseRate rate{25.0, 3};
  CHECK(log_density_unnormalized({0.0, 0.0, 0.0}, rate) == 0.0);

  RngStream rng(19);
  for (int trial = 0; trial < 1000; ++trial) {
    Vec e1(3), e2(3);
    for (double& v : e1) v = rng.normal();
    for (double& v : e2) v = rng.normal();
    const double lhs =
        log_density_unnormalized(e1, rate) - log_density_unnormalized(e2, rate);
    const double rhs = -rate.s * (testutil::norm2(e1) - testutil::norm2(e2));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("log-density ratio stays below epsilon at sensitivity distance") {
  // s = lambda*N*epsilon/2 with ||e1 - e2|| <= 2/(lambda*N) gives |ratio| <= eps.
  const double lambda = 0.5, epsilon = 1.0;
  const int n = 100;
  const NoiseRate rate{lambda * n * epsilon / 2.0, 4};
  const double sensitivity = 2.0 / (lambda * n);
  RngStream rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    Vec e1(4), delta(4);
    for (double& v : e1) v = rng.normal();
    for (double& v : delta) v = rng.normal();
    const double dn = testutil::norm2(delta);
    const double r = sensitivity * rng.uniform();
    Vec e2 = e1;
    for (int j = 0; j < 4; ++j) e2[j] += delta[j] * r / dn;
    const double ratio = log_density_unnormalized(e1, rate) -
                         log_density_unnormalized(e2, rate);
    CHECK(std::abs(ratio) <= epsilon * (1.0 + 1e-12));
  }
}

TEST_CASE("output_perturb is negligible at huge epsilon and deterministic") {
  ModelParams w = ModelParams::zeros(2, 2);
  w.weights = {0.4, -0.9};
  const PrivacyBudget budget{1e9, 0.5, 100};
  RngStream rng(29);
  const ModelParams wp = output_perturb(w, budget, rng);
  CHECK(testutil::dist2(w.weights, wp.weights) < 1e-6);

  RngStream r1(31), r2(31);
  CHECK(output_perturb(w, budget, r1).weights ==
        output_perturb(w, budget, r2).weights);
}

TEST_CASE("output_perturb displacement matches the Gamma mean") {
  // d=2, lambda=0.5, N=100, epsilon=1: expected displacement 0.08.
  ModelParams w = ModelParams::zeros(2, 2);
  w.weights = {1.0, 2.0};
  const PrivacyBudget budget{1.0, 0.5, 100};
  RngStream rng(37);
  const int draws = 20000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    const ModelParams wp = output_perturb(w, budget, rng);
    sum += testutil::dist2(w.weights, wp.weights);
  }
  CHECK(std::abs(sum / draws - 0.08) <= 0.03 * 0.08);
}

TEST_CASE("output_perturb flattens the multiclass matrix") {
  ModelParams w = ModelParams::zeros(3, 4);
  const PrivacyBudget budget{1.0, 0.5, 50};
  RngStream rng(41);
  const ModelParams wp = output_perturb(w, budget, rng);
  CHECK(wp.weights.size() == 12);
  CHECK(testutil::norm2(wp.weights) > 0.0);
}

TEST_CASE("input_perturb_sample displacement matches 2d/epsilon") {
  RngStream rng(43);
  const Vec x{0.3, -0.4};
  const int draws = 100000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    const Vec xp = input_perturb_sample(x, 1.0, rng);
    sum += testutil::dist2(x, xp);
  }
  CHECK(std::abs(sum / draws - 4.0) <= 0.03 * 4.0);

  RngStream rng2(47);
  const Vec near = input_perturb_sample(x, 1e9, rng2);
  CHECK(testutil::dist2(x, near) < 1e-6);

  RngStream a(53), b(53);
  CHECK(input_perturb_sample(x, 2.0, a) == input_perturb_sample(x, 2.0, b));
}

TEST_CASE("noisy-classifier density ratio is bounded by epsilon for neighbors") {
  RngStream rng(59);
  const int n = 50;
  const double lambda = 0.5, epsilon = 1.0;
  const double s = lambda * n * epsilon / 2.0;
  TrainOptions opts;
  opts.lambda = lambda;
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + static_cast<int>(rng.next_u64() % 3);
    const LabeledDataset d1 = testutil::random_dataset(n, d, 2, rng);
    const LabeledDataset d2 =
        neighbor(d1, static_cast<int>(rng.next_u64() % n),
                 {testutil::random_unit_ball(d, rng),
                  static_cast<int>(rng.next_u64() % 2)});
    const ModelParams w1 = train(d1, opts);
    const ModelParams w2 = train(d2, opts);
    const NoiseRate rate{s, d};
    for (int k = 0; k < 20; ++k) {
      Vec target(d);
      for (double& v : target) v = 2.0 * rng.normal();
      Vec eta1(d), eta2(d);
      for (int j = 0; j < d; ++j) {
        eta1[j] = target[j] - w1.weights[j];
        eta2[j] = target[j] - w2.weights[j];
      }
      const double log_ratio = log_density_unnormalized(eta1, rate) -
                               log_density_unnormalized(eta2, rate);
      const double identity =
          -s * (testutil::norm2(eta1) - testutil::norm2(eta2));
      CHECK(std::abs(log_ratio - identity) <=
            1e-12 * std::max(1.0, std::abs(identity)));
      CHECK(std::abs(log_ratio) <=
            s * testutil::dist2(w1.weights, w2.weights) + 1e-12);
      CHECK(std::abs(log_ratio) <= epsilon * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("noise parameter validation") {
  RngStream rng(61);
  NoiseRate bad{0.0, 2};
  CHECK_THROWS_AS(sample_spherical_laplace(bad, rng), std::invalid_argument);
  bad = {1.0, 0};
  CHECK_THROWS_AS(sample_spherical_laplace(bad, rng), std::invalid_argument);
  CHECK_THROWS_AS(validate_budget(PrivacyBudget{-1.0, 0.5, 10}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_budget(PrivacyBudget{1.0, 0.0, 10}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_budget(PrivacyBudget{1.0, 0.5, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(input_perturb_sample({1.0}, 0.0, rng), std::invalid_argument);
}
