#include "kernelstream/variance.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace kernelstream {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSigmaMinusFloor = 1e-4;  // anchor floor when sigma_minus is still zero

double max_prior_variance_ratio(const PosteriorState& state) {
    double m = 1.0;
    const Eigen::VectorXd v = state.step_prior_variances();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        m = std::max(m, 1.0 + v(i) / state.lambda());
    }
    return m;
}

double sigma_hat_of(const PosteriorState& state) {
    const std::size_t t = state.size();
    if (t == 0) {
        throw std::invalid_argument("empirical_sigma: log must be nonempty");
    }
    // Residuals via the factor: K w = (L L^T - (lambda + jitter) I) w.
    const Eigen::Map<const Eigen::VectorXd> y(state.ys().data(),
                                              static_cast<Eigen::Index>(t));
    const Eigen::VectorXd kw =
        state.chol_factor() * (state.chol_factor().transpose() * state.weights()) -
        (state.lambda() + state.jitter()) * state.weights();
    const Eigen::VectorXd resid = y - kw;
    return std::sqrt(resid.squaredNorm() / static_cast<double>(t));
}

}  // namespace

NoiseBracket NoiseBracket::initial(double sigma_minus_prior, double sigma_plus_prior,
                                   double norm_bound_c, bool knows_sigma_plus_prior) {
    if (!(sigma_plus_prior > 0.0) || sigma_minus_prior < 0.0 ||
        sigma_minus_prior > sigma_plus_prior || !(norm_bound_c > 0.0)) {
        throw std::invalid_argument("NoiseBracket::initial: need 0 <= sigma_minus <= sigma_plus, C > 0");
    }
    NoiseBracket b;
    b.sigma_minus = sigma_minus_prior;
    b.sigma_plus = sigma_plus_prior;
    b.lambda_minus = sigma_minus_prior * sigma_minus_prior / (norm_bound_c * norm_bound_c);
    b.lambda_t = sigma_plus_prior * sigma_plus_prior / (norm_bound_c * norm_bound_c);
    b.t = 0;
    b.knows_sigma_plus_prior = knows_sigma_plus_prior;
    b.sigma_plus_prior = sigma_plus_prior;
    return b;
}

double empirical_sigma(const KernelSpec& kernel, const ObservationLog& log, double lambda) {
    if (log.empty()) {
        throw std::invalid_argument("empirical_sigma: log must be nonempty");
    }
    return sigma_hat_of(fit(kernel, log, lambda));
}

double c_term(std::size_t t, double delta) {
    if (t < 1) {
        throw std::invalid_argument("c_term: t must be >= 1");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("c_term: delta must be in (0,1)");
    }
    const double lt = std::log(static_cast<double>(t));
    double correction = 0.0;
    if (lt > 0.0) {
        const double inner = std::numbers::pi * std::numbers::pi * lt * lt / 6.0;
        correction = std::max(0.0, std::log(inner));
    }
    return std::log(std::numbers::e / delta) * (1.0 + correction / std::log(1.0 / delta));
}

double d_term(double gamma, double delta) {
    return 2.0 * std::log(1.0 / delta) + 2.0 * gamma;
}

double alpha_factor(std::size_t t, double c, double d) {
    const double td = static_cast<double>(t);
    return std::max(1.0 - std::sqrt(c / td) - std::sqrt((c + 2.0 * d) / td), 0.0);
}

double sigma_upper_case1(double sigma_hat, std::size_t t, double lambda, double c,
                         double d_at_anchor, double sigma_plus_prior, double norm_bound) {
    const double td = static_cast<double>(t);
    return sigma_hat +
           sigma_plus_prior * (std::sqrt(c / td) + std::sqrt((c + 2.0 * d_at_anchor) / td)) +
           std::sqrt(2.0 * sigma_plus_prior * norm_bound * std::sqrt(lambda * d_at_anchor) / td);
}

double sigma_upper_case2(double sigma_hat, std::size_t t, double lambda, double c,
                         double d_at_anchor, double norm_bound) {
    const double alpha = alpha_factor(t, c, d_at_anchor);
    if (alpha <= 0.0) {
        return kInf;
    }
    const double g = norm_bound * std::sqrt(lambda * d_at_anchor) / (2.0 * static_cast<double>(t));
    const double root = std::sqrt(sigma_hat * alpha + g) + std::sqrt(g);
    return root * root / (alpha * alpha);
}

double sigma_upper_from_stats(double sigma_hat, std::size_t t, double lambda, double c,
                              double d_at_anchor, std::optional<double> sigma_plus_prior,
                              double norm_bound) {
    double best = sigma_upper_case2(sigma_hat, t, lambda, c, d_at_anchor, norm_bound);
    if (sigma_plus_prior) {
        best = std::min(best, sigma_upper_case1(sigma_hat, t, lambda, c, d_at_anchor,
                                                *sigma_plus_prior, norm_bound));
    }
    return best;
}

double sigma_lower_from_stats(double sigma_hat, std::size_t t, double lambda, double c,
                              double max_ratio, std::optional<double> sigma_plus_prior,
                              double norm_bound) {
    const double td = static_cast<double>(t);
    const double sub =
        norm_bound * std::sqrt(lambda / td * (1.0 - 1.0 / std::max(max_ratio, 1.0)));
    double best = (sigma_hat - sub) / (1.0 + std::sqrt(2.0 * c / td));  // case 2
    if (sigma_plus_prior) {
        best = std::max(best, sigma_hat - *sigma_plus_prior * std::sqrt(2.0 * c / td) - sub);
    }
    return std::max(best, 0.0);
}

double sigma_upper(const KernelSpec& kernel, const ObservationLog& log, double lambda,
                   double lambda_star_lower, double delta_prime,
                   std::optional<double> sigma_plus_prior, double norm_bound) {
    if (log.empty()) {
        throw std::invalid_argument("sigma_upper: log must be nonempty");
    }
    const std::size_t t = log.size();
    const double sigma_hat = empirical_sigma(kernel, log, lambda);
    const double c = c_term(t, delta_prime);
    const double d = d_term(information_gain(kernel, log, lambda_star_lower).gamma, delta_prime);
    return sigma_upper_from_stats(sigma_hat, t, lambda, c, d, sigma_plus_prior, norm_bound);
}

double sigma_lower(const KernelSpec& kernel, const ObservationLog& log, double lambda,
                   double delta_prime, std::optional<double> sigma_plus_prior,
                   double norm_bound) {
    if (log.empty()) {
        throw std::invalid_argument("sigma_lower: log must be nonempty");
    }
    const PosteriorState state = fit(kernel, log, lambda);
    const double c = c_term(log.size(), delta_prime);
    return sigma_lower_from_stats(sigma_hat_of(state), log.size(), lambda, c,
                                  max_prior_variance_ratio(state), sigma_plus_prior,
                                  norm_bound);
}

NoiseBracket update_bracket_with_stats(const NoiseBracket& bracket, const ConfidenceParams& params,
                                       double delta_prime, std::size_t t, double sigma_hat,
                                       double max_ratio,
                                       const std::function<double(double)>& gamma_at) {
    params.validate();
    const double c2 = params.norm_bound_c * params.norm_bound_c;
    const double lambda_prev = bracket.lambda_t;
    const std::optional<double> prior =
        bracket.knows_sigma_plus_prior ? std::optional<double>(bracket.sigma_plus_prior)
                                       : std::nullopt;
    const double c = c_term(t, delta_prime);

    NoiseBracket next = bracket;
    next.t = t;
    next.sigma_minus = std::max(
        sigma_lower_from_stats(sigma_hat, t, lambda_prev, c, max_ratio, prior,
                               params.norm_bound_c),
        bracket.sigma_minus);
    next.lambda_minus = next.sigma_minus * next.sigma_minus / c2;

    const double anchor = next.lambda_minus > 0.0
                              ? next.lambda_minus
                              : kSigmaMinusFloor * kSigmaMinusFloor / c2;
    const double d = d_term(gamma_at(anchor), delta_prime);
    next.sigma_plus = std::min(
        sigma_upper_from_stats(sigma_hat, t, lambda_prev, c, d, prior, params.norm_bound_c),
        bracket.sigma_plus);
    next.lambda_t = next.sigma_plus * next.sigma_plus / c2;
    return next;
}

NoiseBracket update_bracket(const NoiseBracket& bracket, const KernelSpec& kernel,
                            const ObservationLog& log, const ConfidenceParams& params,
                            double delta_prime) {
    if (bracket.t + 1 != log.size()) {
        throw std::invalid_argument("update_bracket: expected exactly one new observation");
    }
    const PosteriorState state = fit(kernel, log, bracket.lambda_t);
    return update_bracket_with_stats(
        bracket, params, delta_prime, log.size(), sigma_hat_of(state),
        max_prior_variance_ratio(state),
        [&](double lambda) { return information_gain(kernel, log, lambda).gamma; });
}

VarianceDiagnostics variance_diagnostics(const KernelSpec& kernel, const ObservationLog& log,
                                         double lambda, double lambda_star_lower,
                                         double delta_prime,
                                         std::optional<double> sigma_plus_prior,
                                         double norm_bound) {
    if (log.empty()) {
        throw std::invalid_argument("variance_diagnostics: log must be nonempty");
    }
    const PosteriorState state = fit(kernel, log, lambda);
    const std::size_t t = log.size();
    const double td = static_cast<double>(t);

    VarianceDiagnostics diag;
    diag.sigma_hat = sigma_hat_of(state);
    diag.c_t = c_term(t, delta_prime);
    diag.d_t = d_term(information_gain(kernel, log, lambda_star_lower).gamma, delta_prime);
    diag.alpha = alpha_factor(t, diag.c_t, diag.d_t);

    const double max_ratio = max_prior_variance_ratio(state);
    const double sub = norm_bound * std::sqrt(lambda / td * (1.0 - 1.0 / max_ratio));
    if (sigma_plus_prior) {
        diag.case1_upper = sigma_upper_case1(diag.sigma_hat, t, lambda, diag.c_t, diag.d_t,
                                             *sigma_plus_prior, norm_bound);
        diag.case1_lower =
            diag.sigma_hat - *sigma_plus_prior * std::sqrt(2.0 * diag.c_t / td) - sub;
    } else {
        diag.case1_upper = kInf;
        diag.case1_lower = -kInf;
    }
    diag.case2_upper = sigma_upper_case2(diag.sigma_hat, t, lambda, diag.c_t, diag.d_t, norm_bound);
    diag.case2_lower = (diag.sigma_hat - sub) / (1.0 + std::sqrt(2.0 * diag.c_t / td));
    return diag;
}

SigmaHatBracket raw_sigma_hat_bracket(double sigma_true, std::size_t t, double lambda, double c,
                                      double d_at_anchor, double max_ratio, double norm_bound) {
    const double td = static_cast<double>(t);
    SigmaHatBracket b;
    b.upper = sigma_true * (1.0 + std::sqrt(2.0 * c / td)) +
              norm_bound * std::sqrt(lambda / td) *
                  std::sqrt(1.0 - 1.0 / std::max(max_ratio, 1.0));
    b.lower = sigma_true *
                  (1.0 - std::sqrt(c / td) - std::sqrt((c + 2.0 * d_at_anchor) / td)) -
              std::sqrt(2.0 * sigma_true * std::sqrt(lambda) * norm_bound *
                        std::sqrt(d_at_anchor) / td);
    return b;
}

}  // namespace kernelstream
