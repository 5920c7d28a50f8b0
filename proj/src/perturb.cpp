#include "dpmask/perturb.hpp"

#include <stdexcept>

#include "dpmask/noise.hpp"

namespace dpmask {

LabeledDataset input_perturbation(const LabeledDataset& ds, double epsilon,
                                  const RngStream& rng) {
  if (!ds.norm_bounded) {
    throw std::invalid_argument(
        "input_perturbation requires a norm-bounded dataset (max ||x|| <= 1); "
        "normalize first");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");

  LabeledDataset out = ds;
  out.norm_bounded = false;
  for (int k = 0; k < ds.n(); ++k) {
    RngStream sub = rng.substream(static_cast<uint64_t>(k));
    out.samples[k].x = input_perturb_sample(ds.samples[k].x, epsilon, sub);
  }
  return out;
}

}  // namespace dpmask
