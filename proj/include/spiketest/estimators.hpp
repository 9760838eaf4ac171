#pragma once

#include <optional>
#include <vector>

#include "spiketest/spectrum.hpp"

namespace spiketest {

constexpr double kDefaultGapThreshold = 0.5;

// Estimated spike s of one population: raw eigenvalue theta_hat (the
// plug-in for the limit), bias-corrected theta_unbiased, eigenvector, and
// the squared projection onto known reference directions when available.
struct SpikeEstimate {
    int index = 0;  // 1-based rank among the spikes
    double theta_hat = 0.0;
    double theta_unbiased = 0.0;
    Vector vector;
    std::optional<double> alpha_sq;
    bool separated = false;
    double gap_ratio = 0.0;
};

struct PopulationFit {
    int k = 0;
    int m = 0;
    int n = 0;  // observations behind the covariance; 0 when unknown
    std::vector<SpikeEstimate> spikes;
    Spectrum bulk;  // eigenvalues k+1..m
    bool equal_spike_warning = false;

    const SpikeEstimate& spike(int s) const;  // 1-based
    bool all_separated() const;
};

struct Detectability {
    bool separated = false;
    double gap_ratio = 0.0;
};

// Bias-corrected eigenvalue 1 + 1/M_{1,1}(theta_hat) with the functional
// taken over the bulk. Throws NonDetectableError when the functional is
// not positive.
double unbiased_theta(const Spectrum& bulk, double theta_hat);
double unbiased_theta(const PopulationFit& fit, int s);

// (theta_hat_s - lambda_{k+1}) / (lambda_{k+1} - lambda_m) > threshold.
Detectability check_detectable(double theta_hat, const Spectrum& bulk,
                               double threshold = kDefaultGapThreshold);
Detectability check_detectable(const PopulationFit& fit, int s,
                               double threshold = kDefaultGapThreshold);

// Eigendecompose a covariance matrix and split top-k spikes from the bulk.
PopulationFit fit_population(const Matrix& cov, int k, int n = 0,
                             double gap_threshold = kDefaultGapThreshold);

// Fill alpha_sq on every spike from known reference directions (columns).
void attach_reference_angles(PopulationFit& fit, const Matrix& directions);

// Filtered covariance I + sum_i (theta_unbiased_i - 1) u_i u_i^t stored as
// a rank-k update; apply, inverse square root and log-determinant are
// closed-form.
class FilteredCovariance {
public:
    FilteredCovariance(int m, Vector thetas, Matrix vectors);
    static FilteredCovariance from_fit(const PopulationFit& fit);
    static FilteredCovariance identity(int m) {
        return FilteredCovariance(m, Vector(0), Matrix(m, 0));
    }

    int dim() const { return m_; }
    int order() const { return static_cast<int>(thetas_.size()); }
    const Vector& thetas() const { return thetas_; }
    const Matrix& vectors() const { return vectors_; }

    Matrix apply(const Matrix& x) const;
    Matrix apply_inv_sqrt(const Matrix& x) const;
    double log_det() const;
    Matrix dense() const;

private:
    int m_;
    Vector thetas_;
    Matrix vectors_;  // m x k
};

// Expected squared double angle between the spike eigenvectors of two
// populations, evaluated at the plug-in estimates; the centering term of
// the angle coordinate in T2.
double alpha_sq_theoretical(double theta_unbiased_x, double theta_unbiased_y,
                            double theta_hat_x, double theta_hat_y,
                            const Spectrum& bulk_x, const Spectrum& bulk_y);

// Wishart reference value (1 - c/(theta-1)^2) / (1 + c/(theta-1)) for the
// squared angle between an estimated and a true spike direction.
double wishart_alpha_sq(double theta, double c);

}  // namespace spiketest
