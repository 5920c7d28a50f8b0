#include "dpmask/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpmask {

namespace {

double squared_norm(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

void check_state(const MaskState& state) {
  if (state.g.size() != state.w_prime.weights.size()) {
    throw std::invalid_argument("mask state residual shape mismatch");
  }
}

void check_label(const MaskState& state, int y) {
  const int classes = state.w_prime.mode == ModelMode::kBinary
                          ? 2
                          : state.w_prime.C;
  if (y < 0 || y >= classes) {
    throw std::invalid_argument("label " + std::to_string(y) +
                                " out of range for classifier");
  }
}

// Evaluator for the per-sample objective f(x) = ||g + contribution(x, y)||^2
// and its gradient, with scratch buffers reused across GD iterations.
class CandidateObjective {
 public:
  CandidateObjective(const MaskState& state, int y)
      : state_(state), y_(y), params_(state.w_prime) {
    r_.resize(state.g.size());
    if (params_.mode == ModelMode::kMulticlass) {
      probs_.resize(params_.C);
      wbar_.resize(params_.d);
    }
  }

  double value(const Vec& x) {
    fill_residual(x);
    return squared_norm(r_);
  }

  // Returns f(x) and writes grad f(x) into grad.
  double value_and_gradient(const Vec& x, Vec& grad) {
    fill_residual(x);
    const double f = squared_norm(r_);
    grad.assign(params_.d, 0.0);
    if (params_.mode == ModelMode::kBinary) {
      // r = g - a x, a = t - p; da/dx = -p(1-p) w
      const double pp = p1_ * (1.0 - p1_);
      double rx = 0.0;
      for (int j = 0; j < params_.d; ++j) rx += r_[j] * x[j];
      const double a = t_() - p1_;
      for (int j = 0; j < params_.d; ++j) {
        grad[j] = 2.0 * (-a * r_[j] + pp * rx * params_.weights[j]);
      }
    } else {
      const int C = params_.C;
      // wbar = sum_l p_l w_l
      std::fill(wbar_.begin(), wbar_.end(), 0.0);
      for (int j = 0; j < params_.d; ++j) {
        const double* row = &params_.weights[j * C];
        double acc = 0.0;
        for (int c = 0; c < C; ++c) acc += probs_[c] * row[c];
        wbar_[j] = acc;
      }
      // grad = sum_c 2 [ -a_c r_c + p_c (r_c . x) (w_c - wbar) ]
      for (int c = 0; c < C; ++c) {
        const double a = (y_ == c ? 1.0 : 0.0) - probs_[c];
        double rx = 0.0;
        for (int j = 0; j < params_.d; ++j) rx += r_[j * C + c] * x[j];
        const double scale = 2.0 * probs_[c] * rx;
        for (int j = 0; j < params_.d; ++j) {
          grad[j] += -2.0 * a * r_[j * C + c] +
                     scale * (params_.weights[j * C + c] - wbar_[j]);
        }
      }
    }
    return f;
  }

 private:
  double t_() const { return y_ == 1 ? 1.0 : 0.0; }

  void fill_residual(const Vec& x) {
    if (params_.mode == ModelMode::kBinary) {
      double z = 0.0;
      for (int j = 0; j < params_.d; ++j) z += params_.weights[j] * x[j];
      p1_ = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                     : std::exp(z) / (1.0 + std::exp(z));
      const double a = t_() - p1_;
      for (int j = 0; j < params_.d; ++j) {
        r_[j] = state_.g[j] - a * x[j];
      }
    } else {
      predict_proba_into(params_, x, probs_);
      const int C = params_.C;
      for (int c = 0; c < C; ++c) {
        const double a = (y_ == c ? 1.0 : 0.0) - probs_[c];
        for (int j = 0; j < params_.d; ++j) {
          r_[j * C + c] = state_.g[j * C + c] - a * x[j];
        }
      }
    }
  }

  const MaskState& state_;
  int y_;
  const ModelParams& params_;
  double p1_ = 0.5;
  Vec probs_;
  Vec wbar_;
  Vec r_;
};

}  // namespace

MaskState make_mask_state(int target_n, const ModelParams& w_prime,
                          double lambda,
                          const std::vector<LabeledSample>& seed_set) {
  if (target_n < 0) throw std::invalid_argument("target size must be >= 0");
  if (static_cast<int>(seed_set.size()) > target_n) {
    throw std::invalid_argument("seed set larger than target size");
  }
  MaskState state;
  state.target_n = target_n;
  state.w_prime = w_prime;
  state.lambda = lambda;
  state.g.assign(w_prime.weights.size(), 0.0);
  for (size_t i = 0; i < state.g.size(); ++i) {
    state.g[i] = target_n * lambda * w_prime.weights[i];
  }
  for (const auto& s : seed_set) append_sample(state, s);
  return state;
}

void append_sample(MaskState& state, const LabeledSample& sample) {
  check_state(state);
  check_label(state, sample.y);
  if (static_cast<int>(sample.x.size()) != state.w_prime.d) {
    throw std::invalid_argument("sample dimension does not match classifier");
  }
  if (static_cast<int>(state.samples.size()) >= state.target_n) {
    throw std::invalid_argument("mask state already holds target_n samples");
  }
  accumulate_contribution(state.w_prime, sample.x, sample.y, 1.0, state.g);
  state.samples.push_back(sample);
}

double residual_norm(const MaskState& state) {
  check_state(state);
  return squared_norm(state.g);
}

double per_sample_objective(const Vec& x_candidate, int y,
                            const MaskState& state) {
  check_state(state);
  check_label(state, y);
  if (static_cast<int>(x_candidate.size()) != state.w_prime.d) {
    throw std::invalid_argument("candidate dimension mismatch");
  }
  CandidateObjective obj(state, y);
  return obj.value(x_candidate);
}

Vec objective_gradient(const Vec& x_candidate, int y, const MaskState& state) {
  check_state(state);
  check_label(state, y);
  if (static_cast<int>(x_candidate.size()) != state.w_prime.d) {
    throw std::invalid_argument("candidate dimension mismatch");
  }
  CandidateObjective obj(state, y);
  Vec grad;
  obj.value_and_gradient(x_candidate, grad);
  return grad;
}

Vec solve_next_sample(int y, const MaskState& state, const MaskGenOptions& opts,
                      RngStream& rng, bool* converged) {
  check_state(state);
  check_label(state, y);
  if (opts.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (!(opts.gd_tol > 0.0)) throw std::invalid_argument("gd_tol must be > 0");

  const int d = state.w_prime.d;
  CandidateObjective obj(state, y);

  Vec best_x;
  double best_f = 0.0;
  bool best_converged = false;
  bool have_best = false;

  Vec x(d), grad(d), trial(d), trial_grad(d);
  for (int restart = 0; restart < opts.restarts; ++restart) {
    // Gaussian direction scaled to init_norm.
    double nrm = 0.0;
    do {
      nrm = 0.0;
      for (double& v : x) {
        v = rng.normal();
        nrm += v * v;
      }
      nrm = std::sqrt(nrm);
    } while (nrm == 0.0);
    for (double& v : x) v *= opts.init_norm / nrm;

    double fx = obj.value_and_gradient(x, grad);
    bool run_converged = false;
    for (int iter = 0; iter < opts.max_gd_iters; ++iter) {
      const double gsq = squared_norm(grad);
      if (std::sqrt(gsq) <= opts.gd_tol) {
        run_converged = true;
        break;
      }
      // Same roundoff-limited endgame handling as the trainer: when the
      // Armijo decrease drops below objective noise, require the gradient
      // norm itself to shrink.
      const double slack = 1e-13 * std::abs(fx) + 1e-16;
      const bool roundoff_limited = opts.armijo_c * gsq <= 2.0 * slack;
      double step = 1.0;
      bool accepted = false;
      while (step > 1e-20) {
        for (int j = 0; j < d; ++j) trial[j] = x[j] - step * grad[j];
        double f_trial;
        bool ok;
        if (roundoff_limited) {
          f_trial = obj.value_and_gradient(trial, trial_grad);
          ok = f_trial <= fx - opts.armijo_c * step * gsq + slack &&
               squared_norm(trial_grad) < gsq;
        } else {
          f_trial = obj.value(trial);
          ok = f_trial <= fx - opts.armijo_c * step * gsq + slack;
        }
        if (ok) {
          x = trial;
          if (roundoff_limited) {
            grad = trial_grad;
            fx = f_trial;
          } else {
            fx = obj.value_and_gradient(x, grad);
          }
          accepted = true;
          break;
        }
        step *= opts.backtrack_shrink;
      }
      if (!accepted) break;
    }
    if (opts.projection_radius) {
      const double radius = *opts.projection_radius;
      const double nrm = std::sqrt(squared_norm(x));
      if (nrm > radius) {
        for (double& v : x) v *= radius / nrm;
        fx = obj.value(x);
      }
    }
    if (!have_best || fx < best_f) {
      have_best = true;
      best_f = fx;
      best_x = x;
      best_converged = run_converged;
    }
  }

  // The zero vector contributes nothing and leaves g unchanged; never return
  // anything worse.
  const double f_zero = residual_norm(state);
  if (best_f > f_zero) {
    best_x.assign(d, 0.0);
    best_f = f_zero;
    best_converged = true;
  }
  if (converged) *converged = best_converged;
  return best_x;
}

LabeledDataset generate_masked(const std::vector<int>& labels,
                               const ModelParams& w_prime, double lambda,
                               const std::vector<LabeledSample>& seed_set,
                               const MaskGenOptions& opts, RngStream& rng,
                               const MaskDiagSink& diag) {
  const int target_n = static_cast<int>(seed_set.size() + labels.size());
  MaskState state = make_mask_state(target_n, w_prime, lambda, seed_set);
  for (int y : labels) {
    bool converged = false;
    const Vec x = solve_next_sample(y, state, opts, rng, &converged);
    const double chosen_objective = diag ? per_sample_objective(x, y, state) : 0.0;
    LabeledSample sample{x, y};
    append_sample(state, sample);
    if (diag) {
      MaskIterationDiag record;
      record.index = static_cast<int>(state.samples.size()) - 1;
      record.label = y;
      record.objective = chosen_objective;
      record.residual_norm = std::sqrt(residual_norm(state));
      record.converged = converged;
      diag(record);
    }
  }

  LabeledDataset out;
  out.d = w_prime.d;
  out.C = w_prime.C;
  out.norm_bounded = false;
  out.samples = std::move(state.samples);
  return out;
}

std::pair<LabeledDataset, ModelParams> mask_dataset(
    const LabeledDataset& ds, const PrivacyBudget& budget,
    const std::vector<LabeledSample>& seed_set, const MaskGenOptions& opts,
    RngStream& rng, const MaskDiagSink& diag) {
  if (!ds.norm_bounded) {
    throw std::invalid_argument(
        "mask_dataset requires a norm-bounded dataset (max ||x|| <= 1); "
        "normalize first");
  }
  validate_budget(budget);
  if (budget.n != ds.n()) {
    throw std::invalid_argument("privacy budget N does not match dataset size");
  }
  if (static_cast<int>(seed_set.size()) > ds.n()) {
    throw std::invalid_argument("seed set larger than dataset");
  }

  TrainOptions train_opts;
  train_opts.lambda = budget.lambda;
  const ModelParams w = train(ds, train_opts);
  const ModelParams w_prime = output_perturb(w, budget, rng);

  std::vector<int> labels;
  labels.reserve(ds.n() - seed_set.size());
  for (int i = static_cast<int>(seed_set.size()); i < ds.n(); ++i) {
    labels.push_back(ds.samples[i].y);
  }
  LabeledDataset masked =
      generate_masked(labels, w_prime, budget.lambda, seed_set, opts, rng, diag);
  return {std::move(masked), w_prime};
}

}  // namespace dpmask
