#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spiketest/spectrum.hpp"

namespace spiketest {

// Rank-k multiplicative spike: P = I + sum_i (theta_i - 1) u_i u_i^t with
// orthonormal directions and strictly decreasing thetas.
class PerturbationSpec {
public:
    struct Spike {
        double theta;
        Vector u;
        std::string label;  // "e3" for canonical directions, else free-form
    };

    PerturbationSpec(int dim, std::vector<Spike> spikes);

    // Spikes on standard basis vectors; pairs are (theta, basis index).
    static PerturbationSpec canonical(int dim,
                                      const std::vector<std::pair<double, int>>& spikes);
    static PerturbationSpec identity(int dim) { return PerturbationSpec(dim, {}); }

    int dim() const { return dim_; }
    int order() const { return static_cast<int>(spikes_.size()); }
    const std::vector<Spike>& spikes() const { return spikes_; }
    bool canonical_spikes() const { return canonical_; }
    bool equal_spike_warning() const { return equal_warning_; }

    Matrix dense() const;       // P
    Matrix dense_sqrt() const;  // P^{1/2}

    // Rank-k application of P^{1/2} (or P^{-1/2}) to the columns of x.
    Matrix apply_sqrt(const Matrix& x) const;
    Matrix apply_inv_sqrt(const Matrix& x) const;
    // P^{1/2} A P^{1/2} without forming dense P.
    Matrix conjugate_sqrt(const Matrix& a) const;

private:
    int dim_;
    std::vector<Spike> spikes_;
    bool canonical_ = false;
    bool equal_warning_ = false;
};

// m x n observation matrix, rows = variables, columns = observations.
struct DataMatrix {
    Matrix values;
    double rho = 0.0;
    double sigma = 1.0;
    std::uint64_t seed = 0;

    int m() const { return static_cast<int>(values.rows()); }
    int n() const { return static_cast<int>(values.cols()); }
};

// Columns form an AR(1) chain: col_1 = eps_1,
// col_{i+1} = rho col_i + sqrt(1-rho^2) eps_{i+1}, eps_i iid N(0, sigma^2 I).
// Every column is marginally N(0, sigma^2 I). Deterministic given seed.
DataMatrix gen_ar1_gaussian(int m, int n, double rho, double sigma,
                            std::uint64_t seed);

// P^{1/2} x as an exact rank-k update.
DataMatrix apply_perturbation(const DataMatrix& data, const PerturbationSpec& p);

// (1/n) X X^t.
Matrix sample_covariance(const DataMatrix& data);

}  // namespace spiketest
