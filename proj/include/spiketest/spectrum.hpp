#pragma once

#include <Eigen/Dense>
#include <vector>

#include "spiketest/errors.hpp"

namespace spiketest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Ordered eigenvalues of a symmetric matrix, largest first.
struct Spectrum {
    Vector eigenvalues;  // descending
    int dim = 0;
    bool trace_normalized = false;  // mean eigenvalue ~ 1

    Spectrum() = default;
    explicit Spectrum(Vector values);

    double max_value() const { return eigenvalues(0); }
    double min_value() const { return eigenvalues(dim - 1); }
    double mean_value() const { return eigenvalues.mean(); }
    bool is_psd(double tol = 1e-10) const;

    // Spectrum of the eigenvalues after the top `skip` (the bulk).
    Spectrum drop_top(int skip) const;
};

// Eigenvector sign conventions. `diagonal_positive` makes component i of
// eigenvector i positive (falling back to the largest-magnitude component
// when that entry is ~0); `largest_positive` always uses the
// largest-magnitude component.
enum class SignConvention { diagonal_positive, largest_positive };

struct EigenSystem {
    Spectrum spectrum;
    Matrix vectors;  // column i paired with eigenvalue i
    SignConvention sign_convention = SignConvention::diagonal_positive;
};

// Symmetric eigendecomposition, eigenvalues descending.
// Throws NonSymmetricError when relative asymmetry exceeds 1e-9 and
// ConvergenceError when the underlying solver fails.
EigenSystem eig_sym(const Matrix& a,
                    SignConvention convention = SignConvention::diagonal_positive);

// Eigenvalues only (descending); noticeably faster for large matrices.
Spectrum eig_values(const Matrix& a);

// Re-sign the first `count` eigenvectors so component `component` is
// positive (the alternative convention some results assume).
void apply_component_sign(EigenSystem& es, int component, int count);

// (1/(m-skip)) sum_{i>skip} lambda_i^{s1} / (rho - lambda_i)^{s2}.
// With s2 = 0 this is the raw spectral moment of the retained eigenvalues.
// Requires rho above every retained eigenvalue when s2 > 0.
double m_functional(const Spectrum& spec, double rho, int s1, int s2, int skip);

// Estimated T-transform (1/m) sum_{i>skip} lambda_i / (z - lambda_i).
// Note the denominator is m even when skip > 0.
double t_transform(const Spectrum& spec, double z, int skip);

// Nontrivial eigenvalues of sum_i w_i v_i v_i^t through the k x k reduced
// matrix H_ij = sign(w_i) sqrt(|w_i w_j|) <v_i, v_j>. Mixed-sign weights
// make H nonsymmetric but keep its spectrum real.
Spectrum gram_spectrum(const std::vector<double>& weights,
                       const std::vector<Vector>& vectors);

// sum_i lambda_i <u_i, u>^2 / (lambda_hat - lambda_i) - 1/(theta - 1),
// zero exactly at the eigenvalues of P^{1/2} W P^{1/2} for the rank-one
// perturbation P = I + (theta-1) u u^t.
double secular_residual(const Spectrum& noise, const Vector& angles_sq,
                        double theta, double lambda_hat);

// Pole guard shared by the resolvent-type functionals.
void require_above_pole(double rho, double max_eigenvalue);

}  // namespace spiketest
