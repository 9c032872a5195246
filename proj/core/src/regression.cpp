#include "kernelstream/regression.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace kernelstream {

namespace {

constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-8, 1e-6};
constexpr double kNegativeVarianceTolerance = 1e-10;

// Cholesky of m + jitter*I with escalation. Returns the jitter that worked.
double cholesky_with_jitter(Eigen::MatrixXd& m, Eigen::MatrixXd& lower, const char* what) {
    for (const double jitter : kJitterLadder) {
        Eigen::MatrixXd shifted = m;
        shifted.diagonal().array() += jitter;
        const Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() == Eigen::Success) {
            lower = llt.matrixL();
            return jitter;
        }
    }
    std::ostringstream msg;
    msg << what << ": Cholesky failed after jitter escalation to 1e-6"
        << " (dim " << m.rows() << ", min diag " << m.diagonal().minCoeff()
        << ", max diag " << m.diagonal().maxCoeff() << ")";
    throw NumericError(msg.str());
}

}  // namespace

ObservationLog::ObservationLog(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
    if (xs_.size() != ys_.size()) {
        throw std::invalid_argument("ObservationLog: xs and ys lengths differ");
    }
}

void ObservationLog::append(double x, double y) {
    xs_.push_back(x);
    ys_.push_back(y);
}

PosteriorState fit(const KernelSpec& kernel, const ObservationLog& log, double lambda) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("fit: lambda must be positive");
    }
    PosteriorState state;
    state.kernel_ = kernel;
    state.lambda_ = lambda;
    state.xs_.assign(log.xs().begin(), log.xs().end());
    state.ys_.assign(log.ys().begin(), log.ys().end());

    const Eigen::Index t = static_cast<Eigen::Index>(log.size());
    if (t == 0) {
        state.chol_.resize(0, 0);
        state.weights_.resize(0);
        return state;
    }
    Eigen::MatrixXd gram = kernel_matrix(kernel, log.xs());
    gram.diagonal().array() += lambda;
    state.jitter_ = cholesky_with_jitter(gram, state.chol_, "fit");

    const Eigen::Map<const Eigen::VectorXd> y(state.ys_.data(), t);
    Eigen::VectorXd z = state.chol_.triangularView<Eigen::Lower>().solve(y);
    state.weights_ = state.chol_.transpose().triangularView<Eigen::Upper>().solve(z);
    return state;
}

PosteriorState append_and_refit(const PosteriorState& state, double x, double y,
                                double lambda_next) {
    if (!(lambda_next > 0.0)) {
        throw std::invalid_argument("append_and_refit: lambda must be positive");
    }
    ObservationLog extended(std::vector<double>(state.xs_.begin(), state.xs_.end()),
                            std::vector<double>(state.ys_.begin(), state.ys_.end()));
    extended.append(x, y);
    if (lambda_next != state.lambda_ || state.size() == 0) {
        return fit(state.kernel_, extended, lambda_next);
    }

    // Rank-one extension of the existing factor: new row [w^T, d] with
    // L w = k_t(x) and d^2 = k(x,x) + lambda - |w|^2.
    const Eigen::Index t = static_cast<Eigen::Index>(state.size());
    const Eigen::VectorXd kx = kernel_vector(state.kernel_, x, state.xs());
    const Eigen::VectorXd w = state.chol_.triangularView<Eigen::Lower>().solve(kx);
    const double d2 = eval_kernel(state.kernel_, x, x) + state.lambda_ + state.jitter_ -
                      w.squaredNorm();
    if (!(d2 > 0.0)) {
        return fit(state.kernel_, extended, lambda_next);  // fall back, jitter ladder inside
    }

    PosteriorState next;
    next.kernel_ = state.kernel_;
    next.lambda_ = state.lambda_;
    next.jitter_ = state.jitter_;
    next.xs_.assign(extended.xs().begin(), extended.xs().end());
    next.ys_.assign(extended.ys().begin(), extended.ys().end());
    next.chol_ = Eigen::MatrixXd::Zero(t + 1, t + 1);
    next.chol_.topLeftCorner(t, t) = state.chol_;
    next.chol_.row(t).head(t) = w.transpose();
    next.chol_(t, t) = std::sqrt(d2);

    const Eigen::Map<const Eigen::VectorXd> ynew(next.ys_.data(), t + 1);
    Eigen::VectorXd z = next.chol_.triangularView<Eigen::Lower>().solve(ynew);
    next.weights_ = next.chol_.transpose().triangularView<Eigen::Upper>().solve(z);
    return next;
}

double posterior_mean(const PosteriorState& state, double x) {
    if (state.size() == 0) {
        return 0.0;
    }
    const Eigen::VectorXd kx = kernel_vector(state.kernel(), x, state.xs());
    return kx.dot(state.weights());
}

double posterior_variance_kernel(const PosteriorState& state, double x) {
    const double prior = eval_kernel(state.kernel(), x, x);
    if (state.size() == 0) {
        return prior;
    }
    const Eigen::VectorXd kx = kernel_vector(state.kernel(), x, state.xs());
    const Eigen::VectorXd u = state.chol_factor().triangularView<Eigen::Lower>().solve(kx);
    const double v = prior - u.squaredNorm();
    if (v < -kNegativeVarianceTolerance) {
        std::ostringstream msg;
        msg << "posterior_variance_kernel: negative variance " << v << " at x=" << x
            << " (t=" << state.size() << ", lambda=" << state.lambda() << ")";
        throw NumericError(msg.str());
    }
    return v < 0.0 ? 0.0 : v;
}

double posterior_std(const PosteriorState& state, double x, double sigma) {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("posterior_std: sigma must be positive");
    }
    return std::sqrt(sigma * sigma / state.lambda() * posterior_variance_kernel(state, x));
}

Eigen::VectorXd PosteriorState::step_prior_variances() const {
    const Eigen::Index t = static_cast<Eigen::Index>(size());
    Eigen::VectorXd v(t);
    for (Eigen::Index i = 0; i < t; ++i) {
        const double d = chol_(i, i);
        v(i) = std::max(0.0, d * d - lambda_ - jitter_);
    }
    return v;
}

InfoGainReport information_gain(const KernelSpec& kernel, const ObservationLog& log,
                                double lambda) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("information_gain: lambda must be positive");
    }
    InfoGainReport report;
    report.lambda = lambda;
    report.t = log.size();
    if (log.empty()) {
        return report;
    }
    // (I + K/lambda) is positive definite for any lambda > 0, so this route
    // stays factorable even when (K + lambda I) would need jitter.
    Eigen::MatrixXd m = kernel_matrix(kernel, log.xs()) / lambda;
    m.diagonal().array() += 1.0;
    Eigen::MatrixXd lower;
    cholesky_with_jitter(m, lower, "information_gain");
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < lower.rows(); ++i) {
        logdet += std::log(lower(i, i));
    }
    report.gamma = logdet;  // (1/2) logdet = sum of log of diagonal entries
    return report;
}

}  // namespace kernelstream
