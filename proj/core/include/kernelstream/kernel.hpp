#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace kernelstream {

enum class KernelFamily { GaussianRbf };

/// Stationary kernel on a one-dimensional domain with k(x,x) = 1.
struct KernelSpec {
    KernelFamily family = KernelFamily::GaussianRbf;
    double length_scale = 1.0;
};

/// Validating factory; throws std::invalid_argument for a non-positive scale.
KernelSpec gaussian_rbf(double length_scale);

double eval_kernel(const KernelSpec& spec, double x, double x2);

/// Dense Gram matrix over an ordered point set. Symmetric, unit diagonal, PSD.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, std::span<const double> points);

/// Column vector (k(x, p_i))_i.
Eigen::VectorXd kernel_vector(const KernelSpec& spec, double x, std::span<const double> points);

/// Finite kernel expansion f(x) = sum_i alpha_i k(x, c_i). The RKHS norm
/// sqrt(alpha^T K_cc alpha) is computed once and cached.
class RkhsFunction {
public:
    RkhsFunction(KernelSpec kernel, std::vector<double> centers, std::vector<double> coefficients);

    double operator()(double x) const;

    double rkhs_norm() const { return rkhs_norm_; }
    const KernelSpec& kernel() const { return kernel_; }
    const std::vector<double>& centers() const { return centers_; }
    const std::vector<double>& coefficients() const { return coefficients_; }

private:
    KernelSpec kernel_;
    std::vector<double> centers_;
    std::vector<double> coefficients_;
    double rkhs_norm_ = 0.0;
};

RkhsFunction synth_test_function(const KernelSpec& spec, std::vector<double> centers,
                                 std::vector<double> coefficients);

/// Ground-truth function shipped with the experiments: hand-placed centers on
/// [0,1], two local maxima with the global one near x = 0.94, RKHS norm
/// about 2.07.
RkhsFunction default_test_function(double length_scale = 0.3);

}  // namespace kernelstream
