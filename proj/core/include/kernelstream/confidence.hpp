#pragma once

#include <span>
#include <vector>

#include "kernelstream/regression.hpp"

namespace kernelstream {

struct ConfidenceParams {
    double delta = 0.1;        // confidence level in (0,1)
    double norm_bound_c = 5.0; // known upper bound on the RKHS norm of the truth

    void validate() const;
};

/// Fixed-regularization radius: sqrt(lambda)*norm + sigma*sqrt(2 ln(1/delta) + 2 gamma).
double beta_fixed(double norm_bound, double sigma, double lambda, double gamma, double delta);

/// Online-tuned radius. Same shape as beta_fixed but the sqrt(lambda) term uses
/// the next regularization while gamma is anchored at the lower bound of the
/// predictable sequence.
double beta_tuned(double norm_bound, double sigma, double lambda_next,
                  double gamma_at_lambda_star, double delta);

/// Fully empirical radius: sqrt(lambda_t)*C + sigma_plus_t*sqrt(2 ln(1/delta) + 2 gamma(lambda_minus)).
double beta_bernstein(const ConfidenceParams& params, double sigma_plus_t, double lambda_t,
                      double gamma_at_lambda_minus);

/// Baseline radius multiplier ell for the lambda = sigma^2 regime; the
/// half-width it pairs with is ell * k_{lambda,t}(x,x)^{1/2} (no 1/sqrt(lambda)).
double wang_bound(double norm, double sigma, double gamma_prev, double delta_prime);

/// Deterministic cap sigma_plus * (1 + sqrt(2 ln(1/delta) + 2 gamma)). Every
/// runtime beta_bernstein value is bounded by this with gamma taken at
/// sigma_minus^2 / C^2.
double beta_deterministic_cap(double sigma_plus, double gamma_at_sigma_minus, double delta);

/// Confidence band over a probe grid: mean -/+ sqrt(k_{lambda,t}(x,x)/lambda) * beta.
struct Envelope {
    std::vector<double> grid;
    std::vector<double> lower;
    std::vector<double> upper;
    double beta = 0.0;
    double lambda_used = 0.0;
};

Envelope envelope(const PosteriorState& state, double beta, std::span<const double> probe_grid);

}  // namespace kernelstream
