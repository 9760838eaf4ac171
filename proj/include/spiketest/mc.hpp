#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spiketest/config.hpp"

namespace spiketest {

// Null calibration under H0: P_X = P_Y = (shared spikes + scenario X spike),
// matching how the reference distributions are simulated.
NullCalibration calibrate_null(Method stat, const McConfig& cfg,
                               const ScenarioConfig& sc, int reps);

struct CalibrationSet {
    NullCalibration t3, t4, t5;
    bool has_t3 = false, has_t4 = false, has_t5 = false;
};

// One null sweep filling every requested calibration at once.
CalibrationSet calibrate_set(const McConfig& cfg, const ScenarioConfig& sc,
                             int reps, bool need_t3, bool need_t4, bool need_t5);

struct PowerRow {
    int scenario_id = 0;
    Method method = Method::T1;
    int m = 0, n_x = 0, n_y = 0;
    double theta_x = 0.0, theta_y = 0.0;
    std::string u_x, u_y;
    int reps = 0;
    double power = 0.0;
    double mc_stderr = 0.0;
    int errors = 0;  // reps a statistic failed on (reported, not in the CSV)
};

using ProgressFn = std::function<void(const std::string&)>;

std::vector<PowerRow> run_power_scenario(const McConfig& cfg,
                                         const ScenarioConfig& sc,
                                         const ProgressFn& progress = {});
std::vector<PowerRow> run_power(const McConfig& cfg,
                                const ProgressFn& progress = {});

void write_power_csv(const std::string& path, const std::vector<PowerRow>& rows);

// P-values of T1 and T2 under H0, one pair per replication (for the null
// uniformity checks).
struct NullPValues {
    std::vector<double> t1;
    std::vector<double> t2;
};
NullPValues null_p_values(const McConfig& cfg, const ScenarioConfig& sc, int reps);

}  // namespace spiketest
