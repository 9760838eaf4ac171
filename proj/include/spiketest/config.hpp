#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spiketest/datagen.hpp"
#include "spiketest/two_sample.hpp"

namespace spiketest {

// One spike entry of a config: strength plus either a canonical direction
// label ("e3") or a CSV path holding an m-vector.
struct SpikeConfig {
    double theta = 0.0;
    std::string u = "e1";
};

// One power-study row: the (theta, u) pair that differs between the groups.
struct ScenarioConfig {
    int id = 0;
    SpikeConfig spike_x;
    SpikeConfig spike_y;
};

// Full description of one Monte Carlo experiment.
struct McConfig {
    int m = 500;
    int n_x = 250;
    int n_y = 250;
    double rho = 0.0;
    double sigma = 1.0;
    std::vector<SpikeConfig> shared_spikes;
    std::vector<ScenarioConfig> scenarios;
    int k = 1;
    int reps = 200;
    int calibration_reps = 200;
    double level = 0.05;
    double gap_threshold = kDefaultGapThreshold;
    std::uint64_t seed = 1;
    std::vector<Method> methods = {Method::T1, Method::T2, Method::T3,
                                   Method::T4, Method::T5};
    bool force = false;

    void validate() const;

    // Assemble the X- or Y-side perturbation for a scenario.
    PerturbationSpec perturbation(const ScenarioConfig& sc, bool x_side) const;
    // Canonical string of the H0 experiment (shared + X spike) for hashing.
    std::string null_canonical_string(const ScenarioConfig& sc) const;
    std::uint64_t null_config_hash(const ScenarioConfig& sc) const;
};

McConfig parse_mc_config(const std::string& path);

// Resolve a spike-direction field: "e<j>" or a CSV path with one column.
Vector resolve_direction(const std::string& label, int m);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace spiketest
