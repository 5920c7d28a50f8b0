#pragma once

#include "dpmask/dataset.hpp"
#include "dpmask/rng.hpp"

namespace dpmask {

// Input-perturbation baseline: publishes x_k + eta_k with independent
// spherical-Laplace noise at rate epsilon/2; labels pass through unchanged.
// Each sample draws from its own indexed substream of rng, so the output is
// identical regardless of evaluation order and rng itself is not advanced.
// The perturbed norms are unbounded, so the output is not norm_bounded.
LabeledDataset input_perturbation(const LabeledDataset& ds, double epsilon,
                                  const RngStream& rng);

}  // namespace dpmask
