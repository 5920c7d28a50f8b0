#include "dpmask/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dpmask {

namespace {

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(const Vec& a) { return dot(a, a); }

// log(1 + e^z) without overflow.
double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_dims(const ModelParams& params, const Vec& x) {
  if (static_cast<int>(x.size()) != params.d) {
    throw std::invalid_argument("feature dimension " +
                                std::to_string(x.size()) +
                                " does not match model d=" +
                                std::to_string(params.d));
  }
}

void check_dataset(const ModelParams& params, const LabeledDataset& ds) {
  if (ds.samples.empty()) throw std::invalid_argument("empty dataset");
  if (ds.d != params.d) {
    throw std::invalid_argument("dataset dimension does not match model");
  }
  const int model_classes = params.mode == ModelMode::kBinary ? 2 : params.C;
  if (ds.C > model_classes) {
    throw std::invalid_argument("dataset has more classes than model");
  }
}

// Class scores w_c . x into out (length C).
void scores_into(const ModelParams& params, const Vec& x, Vec& out) {
  out.assign(params.C, 0.0);
  if (params.mode == ModelMode::kBinary) {
    out[1] = dot(params.weights, x);
  } else {
    for (int j = 0; j < params.d; ++j) {
      const double xj = x[j];
      const double* row = &params.weights[j * params.C];
      for (int c = 0; c < params.C; ++c) out[c] += row[c] * xj;
    }
  }
}

}  // namespace

void predict_proba_into(const ModelParams& params, const Vec& x, Vec& out) {
  check_dims(params, x);
  if (params.mode == ModelMode::kBinary) {
    const double p1 = sigmoid(dot(params.weights, x));
    out.assign(2, 0.0);
    out[0] = 1.0 - p1;
    out[1] = p1;
    return;
  }
  scores_into(params, x, out);
  const double m = *std::max_element(out.begin(), out.end());
  double z = 0.0;
  for (double& v : out) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : out) v /= z;
}

Vec predict_proba(const ModelParams& params, const Vec& x) {
  Vec out;
  predict_proba_into(params, x, out);
  return out;
}

double objective(const ModelParams& params, const LabeledDataset& ds,
                 double lambda) {
  check_dataset(params, ds);
  double nll = 0.0;
  if (params.mode == ModelMode::kBinary) {
    for (const auto& s : ds.samples) {
      const double z = dot(params.weights, s.x);
      nll += (s.y == 1) ? softplus(-z) : softplus(z);
    }
  } else {
    Vec scores;
    for (const auto& s : ds.samples) {
      scores_into(params, s.x, scores);
      const double m = *std::max_element(scores.begin(), scores.end());
      double z = 0.0;
      for (double v : scores) z += std::exp(v - m);
      nll += std::log(z) + m - scores[s.y];
    }
  }
  return nll / ds.n() + 0.5 * lambda * squared_norm(params.weights);
}

void accumulate_contribution(const ModelParams& params, const Vec& x, int y,
                             double coeff, Vec& out) {
  if (params.mode == ModelMode::kBinary) {
    const double p1 = sigmoid(dot(params.weights, x));
    const double a = -coeff * ((y == 1 ? 1.0 : 0.0) - p1);
    for (int j = 0; j < params.d; ++j) out[j] += a * x[j];
  } else {
    Vec probs;
    predict_proba_into(params, x, probs);
    for (int c = 0; c < params.C; ++c) {
      const double a = -coeff * ((y == c ? 1.0 : 0.0) - probs[c]);
      for (int j = 0; j < params.d; ++j) out[j * params.C + c] += a * x[j];
    }
  }
}

Vec gradient_residual(const ModelParams& params, const LabeledDataset& ds,
                      double lambda) {
  check_dataset(params, ds);
  Vec grad(params.weights.size(), 0.0);
  const double inv_n = 1.0 / ds.n();
  for (const auto& s : ds.samples) {
    accumulate_contribution(params, s.x, s.y, inv_n, grad);
  }
  for (size_t i = 0; i < grad.size(); ++i) grad[i] += lambda * params.weights[i];
  return grad;
}

ModelParams train(const LabeledDataset& ds, const TrainOptions& opts) {
  return train(ds, opts, ModelParams::zeros(ds.d, ds.C));
}

ModelParams train(const LabeledDataset& ds, const TrainOptions& opts,
                  const ModelParams& init) {
  if (!(opts.lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (!(opts.backtrack_shrink > 0.0 && opts.backtrack_shrink < 1.0)) {
    throw std::invalid_argument("backtrack shrink must lie in (0, 1)");
  }
  if (!(opts.armijo_c > 0.0 && opts.armijo_c < 0.5)) {
    throw std::invalid_argument("armijo constant must lie in (0, 0.5)");
  }
  check_dataset(init, ds);

  ModelParams params = init;
  double fx = objective(params, ds, opts.lambda);
  ModelParams trial = params;
  double grad_norm = 0.0;
  int iters_used = 0;
  for (int iter = 0; iter < opts.max_iters; ++iter, ++iters_used) {
    const Vec grad = gradient_residual(params, ds, opts.lambda);
    const double gsq = squared_norm(grad);
    grad_norm = std::sqrt(gsq);
    if (grad_norm <= opts.tol) return params;

    // Near the optimum the Armijo decrease falls below the roundoff noise
    // of the objective. Forgive differences at that scale, but then demand
    // a strict gradient-norm decrease instead: gradients stay accurately
    // computable, and locally the objective is quadratic, so the guard
    // keeps every accepted step a true contraction.
    const double slack = 1e-13 * std::abs(fx) + 1e-16;
    const bool roundoff_limited = opts.armijo_c * gsq <= 2.0 * slack;
    double step = 1.0;
    bool accepted = false;
    while (step > 1e-20) {
      for (size_t i = 0; i < trial.weights.size(); ++i) {
        trial.weights[i] = params.weights[i] - step * grad[i];
      }
      const double f_trial = objective(trial, ds, opts.lambda);
      bool ok = f_trial <= fx - opts.armijo_c * step * gsq + slack;
      if (ok && roundoff_limited) {
        const Vec trial_grad = gradient_residual(trial, ds, opts.lambda);
        ok = squared_norm(trial_grad) < gsq;
      }
      if (ok) {
        params.weights = trial.weights;
        fx = f_trial;
        accepted = true;
        break;
      }
      step *= opts.backtrack_shrink;
    }
    if (!accepted) break;  // step underflow: cannot make further progress
  }
  const Vec grad = gradient_residual(params, ds, opts.lambda);
  grad_norm = std::sqrt(squared_norm(grad));
  if (grad_norm <= opts.tol) return params;
  std::ostringstream msg;
  msg << "train: no convergence after " << iters_used
      << " iterations (cap " << opts.max_iters << "), final residual norm "
      << grad_norm << " > tol " << opts.tol;
  throw std::runtime_error(msg.str());
}

int predict_class(const ModelParams& params, const Vec& x) {
  Vec probs;
  predict_proba_into(params, x, probs);
  int best = 0;
  for (int c = 1; c < params.C; ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  return best;
}

double accuracy(const ModelParams& params, const LabeledDataset& validation) {
  check_dataset(params, validation);
  int correct = 0;
  for (const auto& s : validation.samples) {
    if (predict_class(params, s.x) == s.y) ++correct;
  }
  return static_cast<double>(correct) / validation.n();
}

std::string model_to_json(const ModelParams& params) {
  nlohmann::json j;
  j["mode"] = params.mode == ModelMode::kBinary ? "binary" : "multiclass";
  j["d"] = params.d;
  j["C"] = params.C;
  j["weights"] = params.weights;
  return j.dump(2);
}

ModelParams model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelParams params;
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "binary") {
    params.mode = ModelMode::kBinary;
  } else if (mode == "multiclass") {
    params.mode = ModelMode::kMulticlass;
  } else {
    throw std::runtime_error("unknown model mode: " + mode);
  }
  params.d = j.at("d").get<int>();
  params.C = j.at("C").get<int>();
  params.weights = j.at("weights").get<Vec>();
  const size_t expected = params.mode == ModelMode::kBinary
                              ? params.d
                              : static_cast<size_t>(params.d) * params.C;
  if (params.weights.size() != expected) {
    throw std::runtime_error("model weights length does not match d and C");
  }
  return params;
}

void save_model(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << model_to_json(params) << '\n';
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace dpmask
