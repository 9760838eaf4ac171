#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spiketest/estimators.hpp"

namespace spiketest {

enum class Method { T1, T2, T3, T4, T5 };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct TestReport {
    Method method = Method::T1;
    double statistic = 0.0;
    std::string reference;  // reference distribution descriptor
    std::optional<double> p_value;
    std::map<double, bool> reject_at;
    std::vector<double> per_spike;        // per-spike contributions
    std::vector<std::string> diagnostics;

    bool rejected(double level) const;
    std::string to_json() const;
};

// Variance of the difference of the two bias-corrected spike eigenvalues:
// 2(M22 - M11^2)/M11^4 summed over both populations, evaluated at the
// plug-in points.
double sigma_theta_sq(const Spectrum& bulk_x, const Spectrum& bulk_y,
                      double rho_x, double rho_y);

// Joint asymptotic covariance of (theta_hat_X, theta_hat_Y, double angle)
// for one spike; entry (1,2) vanishes by construction.
struct JointCovariance3 {
    double s11 = 0.0, s13 = 0.0, s22 = 0.0, s23 = 0.0, s33 = 0.0;
    double theta_hat_x = 0.0, theta_unbiased_x = 0.0;
    double theta_hat_y = 0.0, theta_unbiased_y = 0.0;
    bool psd_ok = true;

    Eigen::Matrix3d dense() const;
};

JointCovariance3 joint_covariance(const PopulationFit& fit_x,
                                  const PopulationFit& fit_y, int s);

// Gradient (3x2) of the map G taking (theta_hat_X, theta_hat_Y, angle sum)
// to (theta_unbiased difference, centered angle sum).
Eigen::Matrix<double, 3, 2> grad_g(const PopulationFit& fit_x,
                                   const PopulationFit& fit_y, int s);
// Same gradient by central finite differences (validation path).
Eigen::Matrix<double, 3, 2> grad_g_fd(const PopulationFit& fit_x,
                                      const PopulationFit& fit_y, int s,
                                      double step = 1e-5);

TestReport t1(const PopulationFit& fit_x, const PopulationFit& fit_y,
              double level = 0.05, bool force = false);
TestReport t2(const PopulationFit& fit_x, const PopulationFit& fit_y,
              double level = 0.05, bool force = false);

// Residual spike pair for one spike index.
struct ResidualSpikePair {
    double lambda_plus = 1.0;
    double lambda_minus = 1.0;
    bool radicand_clamped = false;  // negative radicand clamped to zero
};

// Closed-form residual spikes from (theta_unbiased_X, theta_unbiased_Y,
// squared double angle A).
ResidualSpikePair t3_closed_form(double theta_x, double theta_y, double a);
// Same quantities through the rank-two reduction and gram_spectrum.
ResidualSpikePair t3_gram(double theta_x, double theta_y, double a);

ResidualSpikePair t3_residual_spikes(const PopulationFit& fit_x,
                                     const PopulationFit& fit_y, int s,
                                     bool force = false);

// Null calibration: empirical quantile sample for T4/T5 or per-spike
// moments of the residual spikes for T3.
struct NullCalibration {
    Method stat = Method::T5;
    std::uint64_t config_hash = 0;
    int reps = 0;
    int m = 0;
    int k = 0;
    std::vector<double> samples;  // sorted, T4/T5
    std::vector<double> lambda_plus, sigma_plus;    // per spike, T3
    std::vector<double> lambda_minus, sigma_minus;  // per spike, T3

    double quantile(double q) const;
    void save(const std::string& path) const;
    static NullCalibration load(const std::string& path);
};

TestReport t3_test(const PopulationFit& fit_x, const PopulationFit& fit_y,
                   double level, const NullCalibration& cal, bool force = false);

// Classical statistics on the whitened matrix; generalized inverse on the
// nonzero eigenspace, determinant as the product of nonzero eigenvalues.
double t4_logdet(const Matrix& cov_x, const Matrix& cov_y, int* rank_out = nullptr);
double t5_trace(const Matrix& cov_x, const Matrix& cov_y, int* rank_out = nullptr);

TestReport t4_test(const Matrix& cov_x, const Matrix& cov_y, double level,
                   const NullCalibration& cal);
TestReport t5_test(const Matrix& cov_x, const Matrix& cov_y, double level,
                   const NullCalibration& cal);

}  // namespace spiketest
