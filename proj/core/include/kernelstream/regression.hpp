#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kernelstream/kernel.hpp"

namespace kernelstream {

/// Fatal linear-algebra failure: factorization did not succeed even after
/// jitter escalation. Carries a condition diagnostic in what().
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Append-only observation stream in acquisition order: x_t is decided before
/// y_t is observed, so the index order carries the filtration.
class ObservationLog {
public:
    ObservationLog() = default;
    ObservationLog(std::vector<double> xs, std::vector<double> ys);

    void append(double x, double y);
    std::size_t size() const { return xs_.size(); }
    bool empty() const { return xs_.empty(); }
    std::span<const double> xs() const { return xs_; }
    std::span<const double> ys() const { return ys_; }

private:
    std::vector<double> xs_;
    std::vector<double> ys_;
};

/// Factorized regularized kernel least-squares posterior over a log.
/// Holds the lower Cholesky factor of (K_t + lambda I) and the weight vector
/// (K_t + lambda I)^{-1} Y_t. Immutable after construction; safe to share
/// read-only across threads.
class PosteriorState {
public:
    std::size_t size() const { return xs_.size(); }
    double lambda() const { return lambda_; }
    const KernelSpec& kernel() const { return kernel_; }
    std::span<const double> xs() const { return xs_; }
    std::span<const double> ys() const { return ys_; }
    const Eigen::MatrixXd& chol_factor() const { return chol_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    /// Additive diagonal jitter that was needed to factorize (usually 0).
    double jitter() const { return jitter_; }

    /// Prior predictive variances k_{lambda,i-1}(x_i, x_i) for i = 1..t,
    /// recovered from the factor diagonal: L_ii^2 = lambda + k_{lambda,i-1}.
    Eigen::VectorXd step_prior_variances() const;

private:
    PosteriorState() = default;
    KernelSpec kernel_;
    double lambda_ = 1.0;
    double jitter_ = 0.0;
    std::vector<double> xs_;
    std::vector<double> ys_;
    Eigen::MatrixXd chol_;    // t x t lower factor of K + (lambda + jitter) I
    Eigen::VectorXd weights_; // (K + lambda I)^{-1} Y

    friend PosteriorState fit(const KernelSpec&, const ObservationLog&, double);
    friend PosteriorState append_and_refit(const PosteriorState&, double, double, double);
};

/// Factorize (K_t + lambda I) and solve for the weights. Empty logs are
/// allowed: the posterior mean is identically zero and the variance kernel
/// equals k(x,x).
PosteriorState fit(const KernelSpec& kernel, const ObservationLog& log, double lambda);

/// Posterior over the state's log extended by one observation, factorized at
/// lambda_next. When lambda_next equals the state's lambda the Cholesky factor
/// is extended by one row instead of refactorized.
PosteriorState append_and_refit(const PosteriorState& state, double x, double y,
                                double lambda_next);

double posterior_mean(const PosteriorState& state, double x);

/// Residual kernel k_{lambda,t}(x,x) in [0, k(x,x)]. Roundoff in
/// [-1e-10, 0) is clamped to zero; anything below that is a NumericError.
double posterior_variance_kernel(const PosteriorState& state, double x);

/// sqrt((sigma^2 / lambda) k_{lambda,t}(x,x)).
double posterior_std(const PosteriorState& state, double x, double sigma);

struct InfoGainReport {
    double lambda = 0.0;
    double gamma = 0.0;
    std::size_t t = 0;
};

/// Information gain (1/2) logdet(I + K_t / lambda), computed by a Cholesky
/// factorization of (I + K_t / lambda). Equals the telescoping sum
/// (1/2) sum ln(1 + k_{lambda,t'-1}(x_t',x_t') / lambda).
InfoGainReport information_gain(const KernelSpec& kernel, const ObservationLog& log,
                                double lambda);

}  // namespace kernelstream
