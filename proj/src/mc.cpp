#include "spiketest/mc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "spiketest/csv_io.hpp"
#include "spiketest/parallel.hpp"
#include "spiketest/rng.hpp"
#include "spiketest/stat_math.hpp"

namespace spiketest {

namespace {

// Stream tags keep power, calibration and uniformity draws disjoint.
enum StreamTag : std::uint64_t {
    kPowerX = 1,
    kPowerY = 2,
    kCalX = 3,
    kCalY = 4,
    kNullX = 5,
    kNullY = 6,
};

std::uint64_t scenario_stream(int scenario_id, StreamTag tag) {
    return (static_cast<std::uint64_t>(scenario_id) << 8) | tag;
}

struct Replication {
    Matrix cov_x, cov_y;
    PopulationFit fit_x, fit_y;
};

Replication make_replication(const McConfig& cfg, const PerturbationSpec& px,
                             const PerturbationSpec& py, int scenario_id,
                             StreamTag tag_x, StreamTag tag_y, int rep) {
    Replication r;
    const DataMatrix x = gen_ar1_gaussian(
        cfg.m, cfg.n_x, cfg.rho, cfg.sigma,
        stream_seed(cfg.seed, scenario_stream(scenario_id, tag_x), rep));
    const DataMatrix y = gen_ar1_gaussian(
        cfg.m, cfg.n_y, cfg.rho, cfg.sigma,
        stream_seed(cfg.seed, scenario_stream(scenario_id, tag_y), rep));
    r.cov_x = sample_covariance(apply_perturbation(x, px));
    r.cov_y = sample_covariance(apply_perturbation(y, py));
    r.fit_x = fit_population(r.cov_x, cfg.k, cfg.n_x, cfg.gap_threshold);
    r.fit_y = fit_population(r.cov_y, cfg.k, cfg.n_y, cfg.gap_threshold);
    return r;
}

}  // namespace

CalibrationSet calibrate_set(const McConfig& cfg, const ScenarioConfig& sc,
                             int reps, bool need_t3, bool need_t4, bool need_t5) {
    if (reps < 100)
        throw InsufficientRepsError("calibration needs at least 100 replications");
    const PerturbationSpec p0 = cfg.perturbation(sc, /*x_side=*/true);
    const int k = cfg.k;

    struct RepStats {
        std::vector<double> plus, minus;
        double t4 = 0.0, t5 = 0.0;
    };
    std::vector<RepStats> stats(static_cast<std::size_t>(reps));

    parallel_for(reps, [&](int rep) {
        const Replication r =
            make_replication(cfg, p0, p0, sc.id, kCalX, kCalY, rep);
        RepStats& out = stats[static_cast<std::size_t>(rep)];
        if (need_t3) {
            out.plus.resize(static_cast<std::size_t>(k));
            out.minus.resize(static_cast<std::size_t>(k));
            for (int s = 1; s <= k; ++s) {
                const ResidualSpikePair pair =
                    t3_residual_spikes(r.fit_x, r.fit_y, s, cfg.force);
                out.plus[static_cast<std::size_t>(s - 1)] = pair.lambda_plus;
                out.minus[static_cast<std::size_t>(s - 1)] = pair.lambda_minus;
            }
        }
        if (need_t4) out.t4 = t4_logdet(r.cov_x, r.cov_y);
        if (need_t5) out.t5 = t5_trace(r.cov_x, r.cov_y);
    });

    CalibrationSet set;
    const auto base = [&](Method stat) {
        NullCalibration cal;
        cal.stat = stat;
        cal.config_hash = cfg.null_config_hash(sc);
        cal.reps = reps;
        cal.m = cfg.m;
        cal.k = k;
        return cal;
    };

    if (need_t3) {
        set.t3 = base(Method::T3);
        set.has_t3 = true;
        const double sqrt_m = std::sqrt(static_cast<double>(cfg.m));
        for (int s = 0; s < k; ++s) {
            std::vector<double> plus, minus;
            plus.reserve(static_cast<std::size_t>(reps));
            minus.reserve(static_cast<std::size_t>(reps));
            for (const auto& st : stats) {
                plus.push_back(st.plus[static_cast<std::size_t>(s)]);
                minus.push_back(st.minus[static_cast<std::size_t>(s)]);
            }
            set.t3.lambda_plus.push_back(mean(plus));
            set.t3.sigma_plus.push_back(sample_sd(plus) * sqrt_m);
            set.t3.lambda_minus.push_back(mean(minus));
            set.t3.sigma_minus.push_back(sample_sd(minus) * sqrt_m);
        }
    }
    const auto fill_samples = [&](Method stat, bool need,
                                  const std::function<double(const RepStats&)>& get,
                                  NullCalibration& cal, bool& flag) {
        if (!need) return;
        cal = base(stat);
        flag = true;
        cal.samples.reserve(static_cast<std::size_t>(reps));
        for (const auto& st : stats) cal.samples.push_back(get(st));
        std::sort(cal.samples.begin(), cal.samples.end());
    };
    fill_samples(Method::T4, need_t4, [](const RepStats& s) { return s.t4; },
                 set.t4, set.has_t4);
    fill_samples(Method::T5, need_t5, [](const RepStats& s) { return s.t5; },
                 set.t5, set.has_t5);
    return set;
}

NullCalibration calibrate_null(Method stat, const McConfig& cfg,
                               const ScenarioConfig& sc, int reps) {
    switch (stat) {
        case Method::T3:
            return calibrate_set(cfg, sc, reps, true, false, false).t3;
        case Method::T4:
            return calibrate_set(cfg, sc, reps, false, true, false).t4;
        case Method::T5:
            return calibrate_set(cfg, sc, reps, false, false, true).t5;
        default:
            throw InvalidParamError(
                "calibrate_null: only T3, T4, T5 use simulated references");
    }
}

std::vector<PowerRow> run_power_scenario(const McConfig& cfg,
                                         const ScenarioConfig& sc,
                                         const ProgressFn& progress) {
    const auto say = [&](const std::string& msg) {
        if (progress) progress(msg);
    };

    const bool want = [&](Method m) {
        return std::find(cfg.methods.begin(), cfg.methods.end(), m) !=
               cfg.methods.end();
    };
    const bool need_t3 = want(Method::T3);
    const bool need_t4 = want(Method::T4);
    const bool need_t5 = want(Method::T5);

    CalibrationSet cal;
    if (need_t3 || need_t4 || need_t5) {
        say("scenario " + std::to_string(sc.id) + ": calibrating null (" +
            std::to_string(cfg.calibration_reps) + " reps)");
        cal = calibrate_set(cfg, sc, cfg.calibration_reps, need_t3, need_t4,
                            need_t5);
    }

    const PerturbationSpec px = cfg.perturbation(sc, true);
    const PerturbationSpec py = cfg.perturbation(sc, false);

    say("scenario " + std::to_string(sc.id) + ": running " +
        std::to_string(cfg.reps) + " replications");

    const int n_methods = static_cast<int>(cfg.methods.size());
    std::vector<std::vector<int>> outcome(
        static_cast<std::size_t>(cfg.reps),
        std::vector<int>(static_cast<std::size_t>(n_methods), 0));
    // outcome: 0 = accept, 1 = reject, -1 = error

    parallel_for(cfg.reps, [&](int rep) {
        const Replication r =
            make_replication(cfg, px, py, sc.id, kPowerX, kPowerY, rep);
        for (int mi = 0; mi < n_methods; ++mi) {
            const Method method = cfg.methods[static_cast<std::size_t>(mi)];
            int& slot = outcome[static_cast<std::size_t>(rep)]
                               [static_cast<std::size_t>(mi)];
            try {
                bool reject = false;
                switch (method) {
                    case Method::T1:
                        reject = t1(r.fit_x, r.fit_y, cfg.level, cfg.force)
                                     .rejected(cfg.level);
                        break;
                    case Method::T2:
                        reject = t2(r.fit_x, r.fit_y, cfg.level, cfg.force)
                                     .rejected(cfg.level);
                        break;
                    case Method::T3:
                        reject = t3_test(r.fit_x, r.fit_y, cfg.level, cal.t3,
                                         cfg.force)
                                     .rejected(cfg.level);
                        break;
                    case Method::T4:
                        reject = t4_test(r.cov_x, r.cov_y, cfg.level, cal.t4)
                                     .rejected(cfg.level);
                        break;
                    case Method::T5:
                        reject = t5_test(r.cov_x, r.cov_y, cfg.level, cal.t5)
                                     .rejected(cfg.level);
                        break;
                }
                slot = reject ? 1 : 0;
            } catch (const Error&) {
                slot = -1;
            }
        }
    });

    std::vector<PowerRow> rows;
    for (int mi = 0; mi < n_methods; ++mi) {
        PowerRow row;
        row.scenario_id = sc.id;
        row.method = cfg.methods[static_cast<std::size_t>(mi)];
        row.m = cfg.m;
        row.n_x = cfg.n_x;
        row.n_y = cfg.n_y;
        row.theta_x = sc.spike_x.theta;
        row.theta_y = sc.spike_y.theta;
        row.u_x = sc.spike_x.u;
        row.u_y = sc.spike_y.u;
        row.reps = cfg.reps;
        int rejects = 0, valid = 0;
        for (int rep = 0; rep < cfg.reps; ++rep) {
            const int v = outcome[static_cast<std::size_t>(rep)]
                                 [static_cast<std::size_t>(mi)];
            if (v < 0) {
                ++row.errors;
            } else {
                ++valid;
                rejects += v;
            }
        }
        row.power = valid > 0 ? static_cast<double>(rejects) / valid : 0.0;
        row.mc_stderr =
            valid > 0 ? std::sqrt(row.power * (1.0 - row.power) / valid) : 0.0;
        if (row.errors > 0)
            say("scenario " + std::to_string(sc.id) + " " +
                method_name(row.method) + ": " + std::to_string(row.errors) +
                " replications errored");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<PowerRow> run_power(const McConfig& cfg, const ProgressFn& progress) {
    std::vector<PowerRow> rows;
    for (const auto& sc : cfg.scenarios) {
        auto part = run_power_scenario(cfg, sc, progress);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
}

void write_power_csv(const std::string& path, const std::vector<PowerRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "scenario_id,method,m,n_X,n_Y,theta_X,u_X,theta_Y,u_Y,reps,power,"
           "mc_stderr\n";
    for (const auto& r : rows) {
        out << r.scenario_id << "," << method_name(r.method) << "," << r.m << ","
            << r.n_x << "," << r.n_y << "," << format_full_precision(r.theta_x)
            << "," << r.u_x << "," << format_full_precision(r.theta_y) << ","
            << r.u_y << "," << r.reps << "," << format_full_precision(r.power)
            << "," << format_full_precision(r.mc_stderr) << "\n";
    }
}

NullPValues null_p_values(const McConfig& cfg, const ScenarioConfig& sc, int reps) {
    const PerturbationSpec p0 = cfg.perturbation(sc, true);
    NullPValues out;
    out.t1.resize(static_cast<std::size_t>(reps));
    out.t2.resize(static_cast<std::size_t>(reps));
    parallel_for(reps, [&](int rep) {
        const Replication r =
            make_replication(cfg, p0, p0, sc.id, kNullX, kNullY, rep);
        out.t1[static_cast<std::size_t>(rep)] =
            *t1(r.fit_x, r.fit_y, cfg.level, cfg.force).p_value;
        out.t2[static_cast<std::size_t>(rep)] =
            *t2(r.fit_x, r.fit_y, cfg.level, cfg.force).p_value;
    });
    return out;
}

}  // namespace spiketest
