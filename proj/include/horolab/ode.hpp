#pragma once

#include <functional>
#include <vector>

#include "horolab/types.hpp"

namespace horolab::ode {

// Right-hand side y' = f(t, y). Returns false when y lies outside the region where
// f is defined (e.g. outside the chart); the step is then retried with a smaller h.
using Rhs = std::function<bool(double t, const Vec& y, Vec& dydt)>;

// Scaled error of a trial step; the step is accepted when the result is <= 1.
using ErrorNorm =
    std::function<double(const Vec& y_old, const Vec& y_new, const Vec& error_estimate)>;

// Called after each accepted step with (t, y); returning false stops the
// integration and discards that step.
using StepFilter = std::function<bool(double t, const Vec& y)>;

struct Options {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 0.0;  // 0: automatic
  double max_step = 0.0;      // 0: unbounded
  long max_steps = 2'000'000;
};

enum class Stop { Completed, Rejected, StepUnderflow, MaxSteps };

// Piecewise quartic continuous extension of a Dormand-Prince 5(4) solution.
class DenseSolution {
 public:
  DenseSolution() = default;
  explicit DenseSolution(double t0, Vec y0) : t0_(t0), y0_(std::move(y0)) {}

  double t_begin() const { return t0_; }
  double t_end() const { return steps_.empty() ? t0_ : steps_.back().t + steps_.back().h; }
  int dimension() const { return static_cast<int>(y0_.size()); }
  bool empty() const { return steps_.empty(); }
  std::size_t step_count() const { return steps_.size(); }
  // True when `t` lies between t_begin and t_end (either orientation).
  bool covers(double t) const;

  Vec operator()(double t) const;

  // Accepted node times, including t_begin.
  std::vector<double> nodes() const;

  struct Step {
    double t, h;
    Mat coeff;  // dim x 5 interpolation coefficients
  };
  void push(Step step) { steps_.push_back(std::move(step)); }

 private:
  double t0_ = 0.0;
  Vec y0_;
  std::vector<Step> steps_;
};

struct Result {
  DenseSolution solution;
  Stop stop = Stop::Completed;
  double t_stop = 0.0;
  Vec y_stop;
  long steps = 0;
  long rejected = 0;
};

// Mixed absolute/relative RMS norm (Hairer & Wanner).
ErrorNorm rms_norm(double rtol, double atol);

// Adaptive Dormand-Prince 5(4) with PI step-size control. Integrates from t0 towards
// t_end (either direction).
Result integrate(const Rhs& f, double t0, const Vec& y0, double t_end, const Options& options,
                 const ErrorNorm& norm = {}, const StepFilter& filter = {});

}  // namespace horolab::ode
