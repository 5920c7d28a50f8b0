#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dpmask/rng.hpp"

namespace dpmask {

using Vec = std::vector<double>;

struct LabeledSample {
  Vec x;
  int y = 0;  // class index in [0, C)
};

// Feature vectors with class labels. norm_bounded records whether every
// sample satisfies ||x||_2 <= 1, the precondition of the privacy mechanisms.
struct LabeledDataset {
  std::vector<LabeledSample> samples;
  int d = 0;
  int C = 2;
  bool norm_bounded = false;

  int n() const { return static_cast<int>(samples.size()); }
};

struct GaussianClassSpec {
  Vec mean;
  double variance = 1.0;  // isotropic
  int count = 0;
};
using GaussianMixtureSpec = std::vector<GaussianClassSpec>;

// CSV interchange format: required header "f0,...,f{d-1},label", one sample
// per row, label column overridable by name or 0-based index. Labels -1/+1
// are mapped to class indices 0/1 on load. Row numbers in error messages
// count data rows starting at 1 (header excluded).
LabeledDataset load_csv(const std::string& path,
                        const std::string& label_column = "label");
void save_csv(const LabeledDataset& ds, const std::string& path);

// Divides every sample by the maximum row norm, so the largest sample lands
// exactly on the unit sphere and geometry is preserved. Returns the scale.
std::pair<LabeledDataset, double> normalize_max_norm(const LabeledDataset& ds);

// Per-sample alternative: samples with ||x|| > 1 are shrunk onto the unit
// sphere, everything else is untouched. Use when one outlier would crush
// all norms under the global scale.
LabeledDataset clip_unit_norm(const LabeledDataset& ds);

LabeledDataset gen_gaussian_mixture(const GaussianMixtureSpec& spec,
                                    uint64_t seed);
LabeledDataset gen_gaussian_mixture(const GaussianMixtureSpec& spec,
                                    RngStream& rng);

// Draws one sample from class `cls` of the mixture.
LabeledSample draw_mixture_sample(const GaussianMixtureSpec& spec, int cls,
                                  RngStream& rng);

void validate_mixture_spec(const GaussianMixtureSpec& spec);

// 2-D demo mixtures used by the CLI defaults and the experiment harness.
// Class counts split `total` round-robin (class c gets one extra while
// total % C > c).
GaussianMixtureSpec demo_mixture_spec(int total = 100);         // 3 classes
GaussianMixtureSpec demo_binary_mixture_spec(int total = 100);  // 2 classes

// Copy of ds with the sample at `index` replaced; the two datasets differ
// in exactly that one position.
LabeledDataset neighbor(const LabeledDataset& ds, int index,
                        const LabeledSample& replacement);

// Uniform shuffle, then floor(n * train_fraction) training samples with a
// minimum of 1 per part.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                double train_fraction,
                                                uint64_t seed);

}  // namespace dpmask
