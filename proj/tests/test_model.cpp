#include <doctest.h>

#include <cmath>

#include "dpmask/model.hpp"
#include "test_util.hpp"

using namespace dpmask;

namespace {

ModelParams random_params(int d, int c, RngStream& rng, double scale = 0.8) {
  ModelParams p = ModelParams::zeros(d, c);
  for (double& w : p.weights) w = scale * rng.normal();
  return p;
}

// 1-D stationarity root by bisection: h(w) = lambda*w - (1 - sigmoid(w)).
double separable_pair_optimum(double lambda) {
  auto h = [lambda](double w) {
    return lambda * w - 1.0 / (1.0 + std::exp(w));
  };
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("predict_proba matches the closed-form sigmoid values") {
  ModelParams w0 = ModelParams::zeros(2, 2);
  const Vec p0 = predict_proba(w0, {0.3, -0.7});
  CHECK(p0[0] == doctest::Approx(0.5));
  CHECK(p0[1] == doctest::Approx(0.5));

  ModelParams w = ModelParams::zeros(1, 2);
  w.weights = {std::log(3.0)};
  const Vec p = predict_proba(w, {1.0});
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(predict_proba(w, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("predict_proba softmax is uniform when all columns agree") {
  ModelParams w = ModelParams::zeros(2, 3);
  for (int j = 0; j < 2; ++j)
    for (int c = 0; c < 3; ++c) w.weights[j * 3 + c] = 0.4 * (j + 1);
  const Vec p = predict_proba(w, {0.5, -1.2});
  for (int c = 0; c < 3; ++c) CHECK(p[c] == doctest::Approx(1.0 / 3));

  RngStream rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams params = random_params(3, 4, rng);
    const Vec probs = predict_proba(params, testutil::random_unit_ball(3, rng));
    double total = 0.0;
    for (double v : probs) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("objective at w = 0 is log 2 regardless of data or lambda") {
  RngStream rng(4);
  const LabeledDataset ds = testutil::random_dataset(12, 3, 2, rng);
  const ModelParams w0 = ModelParams::zeros(3, 2);
  CHECK(objective(w0, ds, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(objective(w0, ds, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("objective is convex along random segments") {
  RngStream rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + static_cast<int>(rng.next_u64() % 4);
    const int c = (trial % 2 == 0) ? 2 : 3;
    const LabeledDataset ds = testutil::random_dataset(10, d, c, rng);
    const ModelParams w1 = random_params(d, c, rng, 1.5);
    const ModelParams w2 = random_params(d, c, rng, 1.5);
    const double t = rng.uniform();
    ModelParams mid = w1;
    for (size_t i = 0; i < mid.weights.size(); ++i) {
      mid.weights[i] = t * w1.weights[i] + (1.0 - t) * w2.weights[i];
    }
    const double lambda = 0.5;
    CHECK(objective(mid, ds, lambda) <=
          t * objective(w1, ds, lambda) + (1.0 - t) * objective(w2, ds, lambda) +
              1e-10);
  }
}

TEST_CASE("the trained optimum lower-bounds the objective everywhere") {
  RngStream rng(9);
  const LabeledDataset ds = testutil::random_dataset(20, 3, 2, rng);
  TrainOptions opts;
  opts.lambda = 0.5;
  const ModelParams best = train(ds, opts);
  const double floor = objective(best, ds, 0.5);
  for (int trial = 0; trial < 30; ++trial) {
    const ModelParams w = random_params(3, 2, rng, 2.0);
    CHECK(objective(w, ds, 0.5) >= floor - 1e-12);
  }
}

TEST_CASE("gradient_residual on a single sample at w = 0") {
  LabeledDataset ds;
  ds.d = 2;
  ds.C = 2;
  ds.samples.push_back({{1.0, 0.0}, 1});
  const Vec g = gradient_residual(ModelParams::zeros(2, 2), ds, 0.0);
  CHECK(g[0] == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(0.0));
}

TEST_CASE("gradient_residual matches central finite differences") {
  RngStream rng(14);
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 1 + static_cast<int>(rng.next_u64() % 10);
    const int n = 1 + static_cast<int>(rng.next_u64() % 20);
    const int c = (trial % 2 == 0) ? 2 : 3 + static_cast<int>(rng.next_u64() % 2);
    const double lambda = 0.25 + rng.uniform();
    const LabeledDataset ds = testutil::random_dataset(n, d, c, rng);
    const ModelParams params = random_params(d, c, rng);

    const Vec analytic = gradient_residual(params, ds, lambda);
    auto f = [&](const Vec& w) {
      ModelParams probe = params;
      probe.weights = w;
      return objective(probe, ds, lambda);
    };
    const Vec fd = testutil::central_difference(f, params.weights);
    worst = std::max(worst, testutil::relative_error(fd, analytic));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("train solves the separable pair against a bisection oracle") {
  LabeledDataset ds;
  ds.d = 2;
  ds.C = 2;
  ds.norm_bounded = true;
  ds.samples.push_back({{1.0, 0.0}, 1});
  ds.samples.push_back({{-1.0, 0.0}, 0});
  TrainOptions opts;
  opts.lambda = 0.5;
  opts.tol = 1e-10;
  const ModelParams w = train(ds, opts);
  const double expected = separable_pair_optimum(0.5);
  CHECK(w.weights[0] == doctest::Approx(expected).epsilon(1e-6));
  CHECK(w.weights[0] > 0.0);
  CHECK(w.weights[1] == 0.0);
  const Vec g = gradient_residual(w, ds, 0.5);
  CHECK(testutil::norm2(g) <= opts.tol);
}

TEST_CASE("large lambda shrinks the weights toward zero") {
  RngStream rng(21);
  const LabeledDataset ds = testutil::random_dataset(30, 3, 2, rng);
  TrainOptions opts;
  opts.lambda = 1000.0;
  const ModelParams w = train(ds, opts);
  CHECK(testutil::norm2(w.weights) <= 1e-3);
}

TEST_CASE("a class-symmetric dataset trains to exactly zero") {
  LabeledDataset ds;
  ds.d = 2;
  ds.C = 2;
  const Vec x{0.4, -0.3};
  const Vec mx{-0.4, 0.3};
  ds.samples.push_back({x, 1});
  ds.samples.push_back({mx, 1});
  ds.samples.push_back({x, 0});
  ds.samples.push_back({mx, 0});
  TrainOptions opts;
  opts.lambda = 0.5;
  const ModelParams w = train(ds, opts);
  CHECK(w.weights[0] == 0.0);
  CHECK(w.weights[1] == 0.0);
}

TEST_CASE("retraining from the trained point returns it unchanged") {
  RngStream rng(33);
  const LabeledDataset ds = testutil::random_dataset(25, 3, 3, rng);
  TrainOptions opts;
  opts.lambda = 0.5;
  const ModelParams w1 = train(ds, opts);
  const ModelParams w2 = train(ds, opts, w1);
  CHECK(w1.weights == w2.weights);
}

TEST_CASE("train reports non-convergence with the final residual") {
  RngStream rng(40);
  const LabeledDataset ds = testutil::random_dataset(20, 2, 2, rng);
  TrainOptions opts;
  opts.lambda = 0.5;
  opts.tol = 1e-15;
  opts.max_iters = 2;
  CHECK_THROWS_WITH_AS(train(ds, opts), doctest::Contains("residual"),
                       std::runtime_error);
}

TEST_CASE("accuracy counts argmax matches, ties toward class 0") {
  LabeledDataset ds;
  ds.d = 1;
  ds.C = 2;
  ds.samples.push_back({{1.0}, 1});
  ds.samples.push_back({{-1.0}, 0});
  ModelParams w = ModelParams::zeros(1, 2);
  w.weights = {2.0};
  CHECK(accuracy(w, ds) == doctest::Approx(1.0));

  // w = 0 predicts class 0 everywhere; a balanced set scores one half.
  const ModelParams w0 = ModelParams::zeros(1, 2);
  CHECK(accuracy(w0, ds) == doctest::Approx(0.5));

  // Multiclass ties resolve the same way.
  CHECK(predict_class(ModelParams::zeros(2, 3), {0.1, 0.2}) == 0);
}

TEST_CASE("accuracy equals a brute-force recount") {
  RngStream rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 2 + static_cast<int>(rng.next_u64() % 3);
    const LabeledDataset ds = testutil::random_dataset(40, 3, c, rng);
    const ModelParams params = random_params(3, c, rng, 1.2);
    int correct = 0;
    for (const auto& s : ds.samples) {
      const Vec probs = predict_proba(params, s.x);
      int best = 0;
      for (int k = 1; k < c; ++k) {
        if (probs[k] > probs[best]) best = k;
      }
      if (best == s.y) ++correct;
    }
    CHECK(accuracy(params, ds) ==
          doctest::Approx(static_cast<double>(correct) / ds.n()));
  }
}

TEST_CASE("trained classifiers of neighbor datasets stay within 2/(lambda N)") {
  RngStream rng(62);
  const int n = 50;
  const double lambda = 0.5;
  TrainOptions opts;
  opts.lambda = lambda;
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 1 + static_cast<int>(rng.next_u64() % 4);
    const LabeledDataset d1 = testutil::random_dataset(n, d, 2, rng);
    const LabeledSample repl{testutil::random_unit_ball(d, rng),
                             static_cast<int>(rng.next_u64() % 2)};
    const int idx = static_cast<int>(rng.next_u64() % n);
    const LabeledDataset d2 = neighbor(d1, idx, repl);
    const ModelParams w1 = train(d1, opts);
    const ModelParams w2 = train(d2, opts);
    CHECK(testutil::dist2(w1.weights, w2.weights) <= 2.0 / (lambda * n));
  }
}

TEST_CASE("model JSON round trip is exact") {
  RngStream rng(70);
  for (int c : {2, 3}) {
    const ModelParams params = random_params(4, c, rng);
    const ModelParams back = model_from_json(model_to_json(params));
    CHECK(back.mode == params.mode);
    CHECK(back.d == params.d);
    CHECK(back.C == params.C);
    CHECK(back.weights == params.weights);
  }
  CHECK_THROWS_AS(model_from_json("{\"mode\":\"trinary\",\"d\":1,\"C\":2,"
                                  "\"weights\":[0]}"),
                  std::runtime_error);
  CHECK_THROWS_AS(model_from_json("{\"mode\":\"binary\",\"d\":2,\"C\":2,"
                                  "\"weights\":[0]}"),
                  std::runtime_error);
}
