#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "kernelstream/confidence.hpp"
#include "kernelstream/regression.hpp"

namespace kernelstream {

/// Running noise bracket [sigma_minus, sigma_plus] and the regularizations it
/// induces. sigma_minus is nondecreasing and sigma_plus nonincreasing by the
/// max/min update rules; lambda_t = sigma_plus^2 / C^2 is the regularization
/// for the next acquisition and lambda_minus = sigma_minus^2 / C^2.
struct NoiseBracket {
    double sigma_minus = 0.0;
    double sigma_plus = 1.0;
    double lambda_minus = 0.0;
    double lambda_t = 0.0;
    std::size_t t = 0;
    bool knows_sigma_plus_prior = true;
    double sigma_plus_prior = 1.0;  // the initial deterministic bound, kept for case-1 formulas

    static NoiseBracket initial(double sigma_minus_prior, double sigma_plus_prior,
                                double norm_bound_c, bool knows_sigma_plus_prior = true);
};

/// Root-mean-square residual of the full-log refit at lambda.
double empirical_sigma(const KernelSpec& kernel, const ObservationLog& log, double lambda);

/// ln(e/delta) [1 + ln(pi^2 ln^2(t) / 6) / ln(1/delta)] with the inner
/// correction clamped at zero, so the result is never below ln(e/delta).
double c_term(std::size_t t, double delta);

/// 2 ln(1/delta) + 2 gamma.
double d_term(double gamma, double delta);

/// max(1 - sqrt(c/t) - sqrt((c + 2d)/t), 0). Zero means the agnostic upper
/// bound is vacuous at this t.
double alpha_factor(std::size_t t, double c, double d);

/// Formula-level case bounds. max_ratio is max_{t' <= t} (1 + k_{lambda,t'-1}(x_t',x_t')/lambda).
/// sigma_upper_from_stats returns +infinity when no bound is available.
double sigma_upper_case1(double sigma_hat, std::size_t t, double lambda, double c,
                         double d_at_anchor, double sigma_plus_prior, double norm_bound);
double sigma_upper_case2(double sigma_hat, std::size_t t, double lambda, double c,
                         double d_at_anchor, double norm_bound);  // +inf when alpha = 0
double sigma_upper_from_stats(double sigma_hat, std::size_t t, double lambda, double c,
                              double d_at_anchor, std::optional<double> sigma_plus_prior,
                              double norm_bound);
double sigma_lower_from_stats(double sigma_hat, std::size_t t, double lambda, double c,
                              double max_ratio, std::optional<double> sigma_plus_prior,
                              double norm_bound);

/// Upper noise bound at regularization lambda with the information-gain term
/// anchored at lambda_star_lower. Best of case 1 (needs the prior) and case 2.
double sigma_upper(const KernelSpec& kernel, const ObservationLog& log, double lambda,
                   double lambda_star_lower, double delta_prime,
                   std::optional<double> sigma_plus_prior, double norm_bound);

/// Lower noise bound at regularization lambda, floored at zero.
double sigma_lower(const KernelSpec& kernel, const ObservationLog& log, double lambda,
                   double delta_prime, std::optional<double> sigma_plus_prior,
                   double norm_bound);

/// One adaptive-loop transition driven by precomputed statistics. The four
/// steps: tighten sigma_minus at the previous lambda, derive lambda_minus,
/// tighten sigma_plus with the gain anchored there, derive lambda_t.
/// gamma_at is invoked once with the anchor regularization.
NoiseBracket update_bracket_with_stats(const NoiseBracket& bracket, const ConfidenceParams& params,
                                       double delta_prime, std::size_t t, double sigma_hat,
                                       double max_ratio,
                                       const std::function<double(double)>& gamma_at);

/// Self-contained transition: refits the log at bracket.lambda_t to obtain the
/// residual estimate and the per-step variance ratios. Call once per new
/// observation (bracket.t + 1 == log.size()).
NoiseBracket update_bracket(const NoiseBracket& bracket, const KernelSpec& kernel,
                            const ObservationLog& log, const ConfidenceParams& params,
                            double delta_prime);

/// Read-only audit snapshot of every intermediate quantity at one (log, lambda).
/// Unavailable case values are +/-infinity.
struct VarianceDiagnostics {
    double sigma_hat = 0.0;
    double c_t = 0.0;
    double d_t = 0.0;
    double alpha = 0.0;
    double case1_upper = 0.0;
    double case2_upper = 0.0;
    double case1_lower = 0.0;
    double case2_lower = 0.0;
};

VarianceDiagnostics variance_diagnostics(const KernelSpec& kernel, const ObservationLog& log,
                                         double lambda, double lambda_star_lower,
                                         double delta_prime,
                                         std::optional<double> sigma_plus_prior,
                                         double norm_bound);

/// Predicted bracket for the raw residual estimate given the true noise level;
/// diagnostic only, never drives the adaptive loop.
struct SigmaHatBracket {
    double lower = 0.0;
    double upper = 0.0;
};

SigmaHatBracket raw_sigma_hat_bracket(double sigma_true, std::size_t t, double lambda, double c,
                                      double d_at_anchor, double max_ratio, double norm_bound);

}  // namespace kernelstream
