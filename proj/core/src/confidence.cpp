#include "kernelstream/confidence.hpp"

#include <cmath>
#include <stdexcept>

namespace kernelstream {

void ConfidenceParams::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("ConfidenceParams: delta must be in (0,1)");
    }
    if (!(norm_bound_c > 0.0)) {
        throw std::invalid_argument("ConfidenceParams: norm_bound_c must be positive");
    }
}

double beta_fixed(double norm_bound, double sigma, double lambda, double gamma, double delta) {
    return std::sqrt(lambda) * norm_bound +
           sigma * std::sqrt(2.0 * std::log(1.0 / delta) + 2.0 * gamma);
}

double beta_tuned(double norm_bound, double sigma, double lambda_next,
                  double gamma_at_lambda_star, double delta) {
    return beta_fixed(norm_bound, sigma, lambda_next, gamma_at_lambda_star, delta);
}

double beta_bernstein(const ConfidenceParams& params, double sigma_plus_t, double lambda_t,
                      double gamma_at_lambda_minus) {
    return std::sqrt(lambda_t) * params.norm_bound_c +
           sigma_plus_t * std::sqrt(2.0 * std::log(1.0 / params.delta) +
                                    2.0 * gamma_at_lambda_minus);
}

double wang_bound(double norm, double sigma, double gamma_prev, double delta_prime) {
    const double ell2 = norm * norm +
                        std::sqrt(8.0 * gamma_prev * std::log(2.0 / delta_prime)) +
                        std::sqrt(2.0 * std::log(4.0 / delta_prime)) * norm +
                        2.0 * gamma_prev +
                        2.0 * sigma * std::log(2.0 / delta_prime);
    return std::sqrt(ell2);
}

double beta_deterministic_cap(double sigma_plus, double gamma_at_sigma_minus, double delta) {
    return sigma_plus *
           (1.0 + std::sqrt(2.0 * std::log(1.0 / delta) + 2.0 * gamma_at_sigma_minus));
}

Envelope envelope(const PosteriorState& state, double beta, std::span<const double> probe_grid) {
    if (beta < 0.0) {
        throw std::invalid_argument("envelope: beta must be nonnegative");
    }
    Envelope env;
    env.beta = beta;
    env.lambda_used = state.lambda();
    env.grid.assign(probe_grid.begin(), probe_grid.end());
    env.lower.reserve(probe_grid.size());
    env.upper.reserve(probe_grid.size());
    for (const double x : probe_grid) {
        const double m = posterior_mean(state, x);
        const double hw =
            std::sqrt(posterior_variance_kernel(state, x) / state.lambda()) * beta;
        env.lower.push_back(m - hw);
        env.upper.push_back(m + hw);
    }
    return env;
}

}  // namespace kernelstream
