#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spiketest/datagen.hpp"

namespace spiketest {

// Shared configuration of the invariance checks. The slope tests run on
// ms x thetas with `reps` replications per grid point; the distribution
// (KS) tests run once at (ks_m, ks_theta) with ks_reps replications.
struct LabConfig {
    std::vector<int> ms = {100, 200, 400};
    std::vector<double> thetas = {50.0, 100.0};
    int reps = 150;
    int ks_m = 500;
    double ks_theta = 100.0;
    int ks_reps = 500;
    double c = 0.5;  // aspect ratio of the Wishart-type noise, n = m/c
    int eps = 2;     // extra principal components for the robustness check
    std::uint64_t seed = 20240811;
};

LabConfig parse_lab_config(const std::string& path);

struct GridRow {
    // Named summary statistics for one grid point (always includes m and
    // the relevant thetas).
    std::map<std::string, double> values;
};

struct InvarianceCheckResult {
    std::string check_id;
    std::string claim;  // human-readable statement of the decision rule
    std::string predicted_rate;
    std::vector<GridRow> grid;
    std::map<std::string, double> observed;  // slopes, distances, violations
    bool pass = false;
    bool exact_ok = true;  // exact identities hold on every replication
    std::vector<std::string> notes;
    std::vector<std::map<std::string, double>> detail;  // per-replication
};

std::vector<std::string> lab_check_ids();
InvarianceCheckResult run_lab_check(const std::string& id, const LabConfig& cfg);

InvarianceCheckResult check_eigenvalue_invariance(const LabConfig& cfg);
InvarianceCheckResult check_angle_invariance(const LabConfig& cfg);
InvarianceCheckResult check_dot_product_distribution(const LabConfig& cfg);
InvarianceCheckResult check_invariant_dot_product(const LabConfig& cfg);
InvarianceCheckResult check_component_distribution(const LabConfig& cfg);
InvarianceCheckResult check_double_angle_invariance(const LabConfig& cfg);
InvarianceCheckResult check_double_dot(const LabConfig& cfg);
InvarianceCheckResult check_lemma_statw(const LabConfig& cfg);
InvarianceCheckResult check_secular_equation(const LabConfig& cfg);

// Deterministic orthonormal completion of k orthonormal columns (Gram-
// Schmidt against a seeded random complement); first k columns unchanged.
Matrix basis_completion(const Matrix& vectors, std::uint64_t seed);

// Wishart-type noise matrix: X X^t / n with X an m x n standard Gaussian
// and n = round(m / c).
Matrix wishart_noise(int m, double c, std::uint64_t seed);

// Write one CSV row per grid point plus a JSON summary for the check.
void write_check_outputs(const std::string& out_dir,
                         const InvarianceCheckResult& result);

}  // namespace spiketest
