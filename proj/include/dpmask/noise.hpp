#pragma once

#include "dpmask/dataset.hpp"
#include "dpmask/model.hpp"
#include "dpmask/rng.hpp"

namespace dpmask {

// Rate of the spherical-Laplace density p(eta) ~ e^{-s ||eta||_2} over
// R^dim. Sampled as (uniform sphere direction) x (Gamma(dim, rate s) norm),
// the standard factorization of this density.
struct NoiseRate {
  double s = 1.0;
  int dim = 1;
};

// (epsilon, lambda, N) triple fixing the classifier-release noise rate
// s = lambda * N * epsilon / 2; input perturbation uses s = epsilon / 2.
struct PrivacyBudget {
  double epsilon = 1.0;
  double lambda = 0.5;
  int n = 1;

  double output_rate() const { return lambda * n * epsilon / 2.0; }
  double input_rate() const { return epsilon / 2.0; }
};

void validate_noise_rate(const NoiseRate& rate);
void validate_budget(const PrivacyBudget& budget);

Vec sample_spherical_laplace(const NoiseRate& rate, RngStream& rng);

// -s * ||eta||_2; the normalization constant is omitted, so only
// differences (log-density ratios) are meaningful.
double log_density_unnormalized(const Vec& eta, const NoiseRate& rate);

// w' = w + eta with rate s = lambda*N*epsilon/2. Binary mode perturbs the
// d-vector; multiclass mode perturbs the flattened d*C matrix at the same
// rate, for which no privacy proof exists (heuristic, unproven).
ModelParams output_perturb(const ModelParams& params,
                           const PrivacyBudget& budget, RngStream& rng);

// x + eta with rate s = epsilon/2. The output norm is unbounded.
Vec input_perturb_sample(const Vec& x, double epsilon, RngStream& rng);

}  // namespace dpmask
