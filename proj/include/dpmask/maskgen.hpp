#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "dpmask/dataset.hpp"
#include "dpmask/model.hpp"
#include "dpmask/noise.hpp"
#include "dpmask/rng.hpp"

namespace dpmask {

// Running state of masked-set synthesis against a fixed noisy classifier.
// g is the unnormalized gradient residual of the current set S at w':
//   g = sum_{i in S} contribution(x_i, y_i) + target_n * lambda * w'
// kept incrementally and required to match a from-scratch recomputation.
struct MaskState {
  int target_n = 0;
  ModelParams w_prime;
  double lambda = 0.5;
  std::vector<LabeledSample> samples;
  Vec g;
};

struct MaskGenOptions {
  int restarts = 5;
  double init_norm = 0.5;        // radius of the random Gaussian-direction inits
  double gd_tol = 1e-8;          // on the per-sample objective gradient norm
  int max_gd_iters = 500;
  double backtrack_shrink = 0.5;
  double armijo_c = 1e-4;
  std::optional<double> projection_radius;  // clip ||x'|| if set
};

// Per-sample diagnostics emitted while generating, one record per append.
struct MaskIterationDiag {
  int index = 0;       // position of the appended sample in the output
  int label = 0;
  double objective = 0.0;      // per-sample objective at the chosen candidate
  double residual_norm = 0.0;  // ||g||_2 after the append
  bool converged = true;       // best restart reached the gradient tolerance
};
using MaskDiagSink = std::function<void(const MaskIterationDiag&)>;

MaskState make_mask_state(int target_n, const ModelParams& w_prime,
                          double lambda,
                          const std::vector<LabeledSample>& seed_set);

// Appends the sample and folds its contribution into g.
void append_sample(MaskState& state, const LabeledSample& sample);

// ||g||_2^2, the squared 2-norm of the unnormalized residual of S at w'.
double residual_norm(const MaskState& state);

// Squared residual norm of S with (x_candidate, y) appended.
double per_sample_objective(const Vec& x_candidate, int y,
                            const MaskState& state);

// Gradient of per_sample_objective with respect to x_candidate.
Vec objective_gradient(const Vec& x_candidate, int y, const MaskState& state);

// Backtracking gradient descent from `restarts` random initial points;
// returns the candidate with the lowest per-sample objective. Never worse
// than the zero vector, which would leave g unchanged.
Vec solve_next_sample(int y, const MaskState& state, const MaskGenOptions& opts,
                      RngStream& rng, bool* converged = nullptr);

// Appends one synthesized sample per label in sequence, each produced by
// solve_next_sample against the running state. Output is seed_set followed
// by the synthesized samples; the synthesized features are a function of
// (w_prime, labels, seed_set, rng) only.
LabeledDataset generate_masked(const std::vector<int>& labels,
                               const ModelParams& w_prime, double lambda,
                               const std::vector<LabeledSample>& seed_set,
                               const MaskGenOptions& opts, RngStream& rng,
                               const MaskDiagSink& diag = nullptr);

// End to end: train on ds, perturb the classifier with rate
// lambda*N*epsilon/2, then synthesize masked samples for the labels not
// covered by the seed set, in dataset order. Requires ds.norm_bounded and
// budget.n == ds.n().
std::pair<LabeledDataset, ModelParams> mask_dataset(
    const LabeledDataset& ds, const PrivacyBudget& budget,
    const std::vector<LabeledSample>& seed_set, const MaskGenOptions& opts,
    RngStream& rng, const MaskDiagSink& diag = nullptr);

}  // namespace dpmask
