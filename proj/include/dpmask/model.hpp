#pragma once

#include <string>
#include <vector>

#include "dpmask/dataset.hpp"

namespace dpmask {

enum class ModelMode { kBinary, kMulticlass };

// Regularized logistic regression parameters. Binary mode keeps the single
// weight vector formulation (class 1 probability sigma(w.x)); multiclass
// mode is a full d x C softmax. weights is row-major [feature][class] in
// multiclass mode, plain length-d in binary mode.
struct ModelParams {
  ModelMode mode = ModelMode::kBinary;
  int d = 0;
  int C = 2;
  Vec weights;

  static ModelParams zeros(int d, int C) {
    ModelParams p;
    p.d = d;
    p.C = C;
    p.mode = (C == 2) ? ModelMode::kBinary : ModelMode::kMulticlass;
    p.weights.assign(p.mode == ModelMode::kBinary ? d : d * C, 0.0);
    return p;
  }
};

struct TrainOptions {
  double lambda = 0.5;
  double tol = 1e-8;       // on the gradient residual 2-norm
  int max_iters = 10000;
  double backtrack_shrink = 0.5;  // line-search beta
  double armijo_c = 1e-4;
};

// Class probability vector (length C). Binary: {1 - sigma(w.x), sigma(w.x)}.
Vec predict_proba(const ModelParams& params, const Vec& x);
void predict_proba_into(const ModelParams& params, const Vec& x, Vec& out);

// J(w) = -(1/N) sum_i log p(y_i | x_i, w) + (lambda/2) ||w||^2.
// Strictly convex for lambda > 0.
double objective(const ModelParams& params, const LabeledDataset& ds,
                 double lambda);

// grad J(w); per class block c: -(1/N) sum_i (I[y_i=c] - p(c|x_i,w)) x_i
// + lambda w_c. Zero exactly at the minimizer.
Vec gradient_residual(const ModelParams& params, const LabeledDataset& ds,
                      double lambda);

// Adds coeff * (the unnormalized residual contribution of one sample) into
// `out`: block c gets -coeff * (I[y=c] - p(c|x,w)) * x. Shared by training
// and mask generation so both use the same gradient.
void accumulate_contribution(const ModelParams& params, const Vec& x, int y,
                             double coeff, Vec& out);

// Gradient descent with backtracking (Armijo) line search from w = 0.
// Throws on non-convergence, reporting the final residual norm.
ModelParams train(const LabeledDataset& ds, const TrainOptions& opts);
ModelParams train(const LabeledDataset& ds, const TrainOptions& opts,
                  const ModelParams& init);

// argmax-probability class; ties break toward the lower class index.
int predict_class(const ModelParams& params, const Vec& x);
double accuracy(const ModelParams& params, const LabeledDataset& validation);

// JSON serialization: {"mode", "d", "C", "weights": row-major array}.
std::string model_to_json(const ModelParams& params);
ModelParams model_from_json(const std::string& text);
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace dpmask
