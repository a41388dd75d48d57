#pragma once

// Gaussian distribution utilities: CDF, quantile, covariance handling.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ccopf {

inline double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779399461;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
    // erfc keeps full precision in the lower tail.
    return 0.5 * std::erfc(-x * 0.7071067811865475244008444);
}

/// Inverse standard normal CDF. Rational approximation (Acklam) polished
/// with two Newton steps on the CDF; absolute error < 1e-13 over (0,1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("normal_quantile: p must lie in (0,1), got " + std::to_string(p));

    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};

    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int it = 0; it < 2; ++it) {
        double e = normal_cdf(x) - p;
        double u = e / normal_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);  // Halley step
    }
    return x;
}

/// Symmetric PSD square root. Eigenvalues below the jitter threshold
/// (relative to the spectral radius) are clipped to exactly zero, so a
/// zero covariance factors to zero and indefinite estimation noise is
/// discarded.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sigma, double jitter = 1e-12) {
    Eigen::MatrixXd s = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    Eigen::VectorXd lam = eig.eigenvalues();
    for (int i = 0; i < lam.size(); ++i) lam[i] = lam[i] > jitter * scale ? lam[i] : 0.0;
    return eig.eigenvectors() * lam.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

/// Wind forecast-error model: zero-mean multivariate Gaussian with known
/// covariance, one dimension per wind farm. `mean` is the forecast
/// adjustment extracted when the model was fitted from samples (the errors
/// themselves are modeled as zero-mean around the adjusted forecast).
class WindModel {
public:
    WindModel() = default;
    WindModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance, std::string source = "synthetic")
        : mean_(std::move(mean)), cov_(std::move(covariance)), source_(std::move(source)) {
        if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size())
            throw std::invalid_argument("WindModel: dimension mismatch between mean and covariance");
        if (!cov_.isApprox(cov_.transpose(), 1e-9))
            throw std::invalid_argument("WindModel: covariance must be symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
        double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
        if (eig.eigenvalues().minCoeff() < -1e-8 * scale)
            throw std::invalid_argument("WindModel: covariance is not positive semidefinite");
        cov_ = 0.5 * (cov_ + cov_.transpose());
        sqrt_ = psd_sqrt(cov_);
    }

    int dim() const { return static_cast<int>(mean_.size()); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    const Eigen::MatrixXd& sqrt_covariance() const { return sqrt_; }
    const std::string& source() const { return source_; }

    /// Standard deviation of the total deviation  sum_i omega_i.
    double total_sigma() const {
        if (dim() == 0) return 0.0;
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(dim());
        return std::sqrt(std::max(0.0, ones.dot(cov_ * ones)));
    }

private:
    Eigen::VectorXd mean_{Eigen::VectorXd::Zero(0)};
    Eigen::MatrixXd cov_{Eigen::MatrixXd::Zero(0, 0)};
    Eigen::MatrixXd sqrt_{Eigen::MatrixXd::Zero(0, 0)};
    std::string source_{"synthetic"};
};

}  // namespace ccopf
