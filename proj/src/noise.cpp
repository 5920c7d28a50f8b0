#include "dpmask/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace dpmask {

void validate_noise_rate(const NoiseRate& rate) {
  if (!(rate.s > 0.0) || !std::isfinite(rate.s)) {
    throw std::invalid_argument("noise rate must be finite and positive");
  }
  if (rate.dim < 1) throw std::invalid_argument("noise dimension must be >= 1");
}

void validate_budget(const PrivacyBudget& budget) {
  if (!(budget.epsilon > 0.0) || !std::isfinite(budget.epsilon)) {
    throw std::invalid_argument("epsilon must be finite and positive");
  }
  if (!(budget.lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (budget.n < 1) throw std::invalid_argument("N must be >= 1");
}

Vec sample_spherical_laplace(const NoiseRate& rate, RngStream& rng) {
  validate_noise_rate(rate);
  // Direction: normalized Gaussian vector, uniform on the unit sphere.
  Vec eta(rate.dim);
  double nrm = 0.0;
  do {
    nrm = 0.0;
    for (double& v : eta) {
      v = rng.normal();
      nrm += v * v;
    }
    nrm = std::sqrt(nrm);
  } while (nrm == 0.0);
  // Norm: Gamma(dim, rate s), drawn as a sum of dim Exponential(s) variables.
  double radius = 0.0;
  for (int k = 0; k < rate.dim; ++k) {
    radius -= std::log(rng.uniform_pos());
  }
  radius /= rate.s;
  for (double& v : eta) v *= radius / nrm;
  return eta;
}

double log_density_unnormalized(const Vec& eta, const NoiseRate& rate) {
  if (static_cast<int>(eta.size()) != rate.dim) {
    throw std::invalid_argument("noise vector dimension mismatch");
  }
  double sq = 0.0;
  for (double v : eta) sq += v * v;
  return -rate.s * std::sqrt(sq);
}

ModelParams output_perturb(const ModelParams& params,
                           const PrivacyBudget& budget, RngStream& rng) {
  validate_budget(budget);
  NoiseRate rate;
  rate.s = budget.output_rate();
  rate.dim = static_cast<int>(params.weights.size());
  const Vec eta = sample_spherical_laplace(rate, rng);
  ModelParams out = params;
  for (size_t i = 0; i < out.weights.size(); ++i) out.weights[i] += eta[i];
  return out;
}

Vec input_perturb_sample(const Vec& x, double epsilon, RngStream& rng) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  NoiseRate rate;
  rate.s = epsilon / 2.0;
  rate.dim = static_cast<int>(x.size());
  Vec out = sample_spherical_laplace(rate, rng);
  for (size_t i = 0; i < out.size(); ++i) out[i] += x[i];
  return out;
}

}  // namespace dpmask
