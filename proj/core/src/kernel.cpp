#include "kernelstream/kernel.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace kernelstream {

KernelSpec gaussian_rbf(double length_scale) {
    if (!(length_scale > 0.0)) {
        throw std::invalid_argument("gaussian_rbf: length_scale must be positive");
    }
    return KernelSpec{KernelFamily::GaussianRbf, length_scale};
}

double eval_kernel(const KernelSpec& spec, double x, double x2) {
    const double d = x - x2;
    return std::exp(-d * d / (2.0 * spec.length_scale * spec.length_scale));
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, std::span<const double> points) {
    const Eigen::Index n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = eval_kernel(spec, points[static_cast<std::size_t>(i)],
                                         points[static_cast<std::size_t>(j)]);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Eigen::VectorXd kernel_vector(const KernelSpec& spec, double x, std::span<const double> points) {
    const Eigen::Index n = static_cast<Eigen::Index>(points.size());
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = eval_kernel(spec, x, points[static_cast<std::size_t>(i)]);
    }
    return v;
}

RkhsFunction::RkhsFunction(KernelSpec kernel, std::vector<double> centers,
                           std::vector<double> coefficients)
    : kernel_(kernel), centers_(std::move(centers)), coefficients_(std::move(coefficients)) {
    if (centers_.empty() || centers_.size() != coefficients_.size()) {
        throw std::invalid_argument("RkhsFunction: centers and coefficients must match and be nonempty");
    }
    const Eigen::MatrixXd kcc = kernel_matrix(kernel_, centers_);
    const Eigen::Map<const Eigen::VectorXd> alpha(coefficients_.data(),
                                                  static_cast<Eigen::Index>(coefficients_.size()));
    rkhs_norm_ = std::sqrt(std::max(0.0, alpha.dot(kcc * alpha)));
}

double RkhsFunction::operator()(double x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < centers_.size(); ++i) {
        acc += coefficients_[i] * eval_kernel(kernel_, x, centers_[i]);
    }
    return acc;
}

RkhsFunction synth_test_function(const KernelSpec& spec, std::vector<double> centers,
                                 std::vector<double> coefficients) {
    return RkhsFunction(spec, std::move(centers), std::move(coefficients));
}

RkhsFunction default_test_function(double length_scale) {
    return RkhsFunction(gaussian_rbf(length_scale),
                        {0.08, 0.25, 0.45, 0.85, 0.97},
                        {1.05, 0.90, -1.30, 1.35, 0.55});
}

}  // namespace kernelstream
