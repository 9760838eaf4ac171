#include "spiketest/invariance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spiketest/config.hpp"
#include "spiketest/csv_io.hpp"
#include "spiketest/estimators.hpp"
#include "spiketest/kv.hpp"
#include "spiketest/parallel.hpp"
#include "spiketest/rng.hpp"
#include "spiketest/stat_math.hpp"

namespace spiketest {

Matrix wishart_noise(int m, double c, std::uint64_t seed) {
    const int n = std::max(1, static_cast<int>(std::lround(m / c)));
    return sample_covariance(gen_ar1_gaussian(m, n, 0.0, 1.0, seed));
}

Matrix basis_completion(const Matrix& vectors, std::uint64_t seed) {
    const int m = static_cast<int>(vectors.rows());
    const int k = static_cast<int>(vectors.cols());
    if (k > m) throw DimensionError("basis_completion: more columns than rows");
    for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) {
            const double dot = vectors.col(i).dot(vectors.col(j));
            if (std::fabs(dot - (i == j ? 1.0 : 0.0)) > 1e-8)
                throw NotOrthonormalError("basis_completion: inputs not orthonormal");
        }
    }
    Matrix q(m, m);
    q.leftCols(k) = vectors;
    Rng rng(seed);
    for (int j = k; j < m; ++j) {
        Vector v(m);
        for (;;) {
            for (int i = 0; i < m; ++i) v(i) = rng.normal();
            for (int pass = 0; pass < 2; ++pass)
                for (int i = 0; i < j; ++i) v -= q.col(i).dot(v) * q.col(i);
            const double norm = v.norm();
            if (norm > 1e-8) {
                q.col(j) = v / norm;
                break;
            }
        }
    }
    return q;
}

namespace {

std::uint64_t check_stream(const std::string& check_id, int grid_index) {
    return fnv1a64(check_id + ":" + std::to_string(grid_index));
}

struct SlopePoint {
    double x;  // log of the rate variable
    double y;  // log of the observed residual summary
};

double slope_of(const std::vector<SlopePoint>& pts) {
    std::vector<double> x, y;
    for (const auto& p : pts) {
        x.push_back(p.x);
        y.push_back(p.y);
    }
    return regression_slope(x, y);
}

bool slope_ok(double slope, double target, double tol = 0.3) {
    return std::fabs(slope - target) <= tol;
}

// Spectral moments of W via traces (no eigendecomposition):
// m2 = tr(W^2)/m, m3 = tr(W^3)/m, m4 = tr(W^4)/m.
struct WMoments {
    double m2, m3, m4;
};

WMoments w_moments(const Matrix& w) {
    const double m = static_cast<double>(w.rows());
    const Matrix w2 = w * w;
    WMoments out;
    out.m2 = w.squaredNorm() / m;
    out.m3 = w2.cwiseProduct(w).sum() / m;
    out.m4 = w2.squaredNorm() / m;
    return out;
}

PerturbationSpec canonical_spikes(int m, const std::vector<double>& thetas) {
    std::vector<std::pair<double, int>> spikes;
    for (std::size_t i = 0; i < thetas.size(); ++i)
        spikes.emplace_back(thetas[i], static_cast<int>(i) + 1);
    return PerturbationSpec::canonical(m, spikes);
}

PerturbationSpec single_spike(int m, double theta, int index) {
    return PerturbationSpec::canonical(m, {{theta, index}});
}

void append_detail(InvarianceCheckResult& result,
                   std::vector<std::map<std::string, double>>& rows) {
    for (auto& r : rows) result.detail.push_back(std::move(r));
}

}  // namespace

InvarianceCheckResult check_eigenvalue_invariance(const LabConfig& cfg) {
    InvarianceCheckResult result;
    result.check_id = "eigenvalue-invariance";
    result.claim =
        "spiked eigenvalues of the order-k model match their order-1 "
        "counterparts; median |difference| scales like theta_s/m "
        "(log-log slope -1 +/- 0.3 in m/theta_s)";
    result.predicted_rate = "theta_s/m";

    std::vector<SlopePoint> pts1, pts2;
    int grid_index = 0;
    for (int m : cfg.ms) {
        for (double theta : cfg.thetas) {
            const double theta1 = 2.0 * theta, theta2 = theta;
            const PerturbationSpec pk = canonical_spikes(m, {theta1, theta2});
            const PerturbationSpec p1 = single_spike(m, theta1, 1);
            const PerturbationSpec p2 = single_spike(m, theta2, 2);
            std::vector<double> d1(cfg.reps), d2(cfg.reps);
            std::vector<std::map<std::string, double>> detail(cfg.reps);
            const std::uint64_t stream = check_stream(result.check_id, grid_index);
            parallel_for(cfg.reps, [&](int rep) {
                const Matrix w =
                    wishart_noise(m, cfg.c, stream_seed(cfg.seed, stream, rep));
                const Spectrum lk = eig_values(pk.conjugate_sqrt(w));
                const Spectrum l1 = eig_values(p1.conjugate_sqrt(w));
                const Spectrum l2 = eig_values(p2.conjugate_sqrt(w));
                d1[rep] = std::fabs(lk.eigenvalues(0) - l1.eigenvalues(0));
                d2[rep] = std::fabs(lk.eigenvalues(1) - l2.eigenvalues(0));
                detail[rep] = {{"m", double(m)}, {"theta", theta},
                               {"rep", double(rep)}, {"d_s1", d1[rep]},
                               {"d_s2", d2[rep]}};
            });
            GridRow row;
            row.values = {{"m", double(m)},       {"theta1", theta1},
                          {"theta2", theta2},     {"reps", double(cfg.reps)},
                          {"median_d_s1", median(d1)},
                          {"median_d_s2", median(d2)}};
            result.grid.push_back(row);
            // rate for s=1 is theta_2/m as well (second spike drives it)
            pts1.push_back({std::log(m / theta2), std::log(median(d1))});
            pts2.push_back({std::log(m / theta2), std::log(median(d2))});
            append_detail(result, detail);
            ++grid_index;
        }
    }
    const double slope1 = slope_of(pts1), slope2 = slope_of(pts2);
    result.observed = {{"slope_s1", slope1}, {"slope_s2", slope2}};
    result.pass = slope_ok(slope1, -1.0) && slope_ok(slope2, -1.0);
    return result;
}

InvarianceCheckResult check_angle_invariance(const LabConfig& cfg) {
    InvarianceCheckResult result;
    result.check_id = "angle-invariance";
    result.claim =
        "general angle of the order-k model matches the order-1 squared "
        "component; median |difference| scales like 1/(theta_s m) "
        "(slope -1 +/- 0.3 in theta_s*m); large-theta approximation "
        "1+(1-M2)/theta holds within 5/theta^2 + 3*stderr; mean angle "
        "matches the Wishart aspect-ratio formula within 0.02";
    result.predicted_rate = "1/(theta_s m)";

    std::vector<SlopePoint> pts;
    bool remark3_ok = true, wishart_ok = true;
    int grid_index = 0;
    const int m_max = *std::max_element(cfg.ms.begin(), cfg.ms.end());
    for (int m : cfg.ms) {
        for (double theta : cfg.thetas) {
            const double theta1 = 2.0 * theta, theta2 = theta;
            const PerturbationSpec pk = canonical_spikes(m, {theta1, theta2});
            const PerturbationSpec p2 = single_spike(m, theta2, 2);
            std::vector<double> d(cfg.reps), a_top(cfg.reps), pred(cfg.reps);
            std::vector<std::map<std::string, double>> detail(cfg.reps);
            const std::uint64_t stream = check_stream(result.check_id, grid_index);
            parallel_for(cfg.reps, [&](int rep) {
                const Matrix w =
                    wishart_noise(m, cfg.c, stream_seed(cfg.seed, stream, rep));
                const EigenSystem ek = eig_sym(pk.conjugate_sqrt(w));
                const EigenSystem e2 = eig_sym(p2.conjugate_sqrt(w));
                const double ak = ek.vectors(0, 1) * ek.vectors(0, 1) +
                                  ek.vectors(1, 1) * ek.vectors(1, 1);
                const double a1 = e2.vectors(1, 0) * e2.vectors(1, 0);
                d[rep] = std::fabs(ak - a1);
                a_top[rep] = ek.vectors(0, 0) * ek.vectors(0, 0) +
                             ek.vectors(1, 0) * ek.vectors(1, 0);
                const double m2 = w.squaredNorm() / m;
                pred[rep] = 1.0 + (1.0 - m2) / theta1;
                detail[rep] = {{"m", double(m)},       {"theta", theta},
                               {"rep", double(rep)},   {"d_angle", d[rep]},
                               {"alpha_sq_1", a_top[rep]}, {"pred_large_theta", pred[rep]}};
            });
            const double bias = std::fabs(mean(a_top) - mean(pred));
            const double allow = 5.0 / (theta1 * theta1) +
                                 3.0 * sample_sd(a_top) / std::sqrt(double(cfg.reps));
            if (bias > allow) remark3_ok = false;
            double wishart_gap = 0.0;
            if (m == m_max) {
                wishart_gap = std::fabs(mean(a_top) - wishart_alpha_sq(theta1, cfg.c));
                if (wishart_gap > 0.02) wishart_ok = false;
            }
            GridRow row;
            row.values = {{"m", double(m)},           {"theta1", theta1},
                          {"theta2", theta2},         {"reps", double(cfg.reps)},
                          {"median_d", median(d)},    {"mean_alpha_sq_1", mean(a_top)},
                          {"remark3_bias", bias},     {"remark3_allow", allow},
                          {"wishart_gap", wishart_gap}};
            result.grid.push_back(row);
            pts.push_back({std::log(theta2 * m), std::log(median(d))});
            append_detail(result, detail);
            ++grid_index;
        }
    }
    const double slope = slope_of(pts);
    result.observed = {{"slope", slope},
                       {"remark3_ok", remark3_ok ? 1.0 : 0.0},
                       {"wishart_ok", wishart_ok ? 1.0 : 0.0}};
    result.pass = slope_ok(slope, -1.0) && remark3_ok && wishart_ok;
    return result;
}

InvarianceCheckResult check_dot_product_distribution(const LabConfig& cfg) {
    InvarianceCheckResult result;
    result.check_id = "dot-product";
    result.claim =
        "bulk dot product of the two spiked eigenvectors, rescaled by "
        "sqrt(theta1 theta2 m / V), is standard normal (KS < 0.1, mean "
        "within 3/sqrt(reps), variance ratio in [0.8,1.25]); for finite "
        "theta2 the statistic scales like 1/sqrt(theta1 m) "
        "(slope -0.5 +/- 0.3)";
    result.predicted_rate = "normal limit; O_p(1/sqrt(theta1 m)) for finite theta2";

    // Distribution part at (ks_m, ks_theta).
    const int m = cfg.ks_m;
    const double theta1 = 2.0 * cfg.ks_theta, theta2 = cfg.ks_theta;
    const PerturbationSpec pk = canonical_spikes(m, {theta1, theta2});
    std::vector<double> z(cfg.ks_reps), dstat(cfg.ks_reps), vpred(cfg.ks_reps);
    std::vector<std::map<std::string, double>> detail(cfg.ks_reps);
    const std::uint64_t stream = check_stream(result.check_id, 0);
    parallel_for(cfg.ks_reps, [&](int rep) {
        const Matrix w = wishart_noise(m, cfg.c, stream_seed(cfg.seed, stream, rep));
        const EigenSystem ek = eig_sym(pk.conjugate_sqrt(w));
        double dot_tail = 0.0;
        for (int i = 2; i < m; ++i) dot_tail += ek.vectors(i, 0) * ek.vectors(i, 1);
        const WMoments mm = w_moments(w);
        const double v = (1.0 + mm.m2) * (1.0 + mm.m2) * (mm.m2 - 1.0) +
                         (mm.m4 - mm.m2 * mm.m2) -
                         2.0 * (1.0 + mm.m2) * (mm.m3 - mm.m2);
        dstat[rep] = dot_tail;
        vpred[rep] = v;
        z[rep] = dot_tail * std::sqrt(theta1 * theta2 * m / v);
        detail[rep] = {{"m", double(m)},   {"theta1", theta1},
                       {"theta2", theta2}, {"rep", double(rep)},
                       {"dot", dot_tail},  {"v_pred", v}};
    });
    append_detail(result, detail);

    const double ks = ks_distance(z, normal_cdf);
    const double mean_z = mean(z);
    const double sd_d = sample_sd(dstat);
    const double var_ratio = sd_d * sd_d * theta1 * theta2 * m / mean(vpred);
    const double wishart_var =
        (1.0 - wishart_alpha_sq(theta1, cfg.c)) *
        (1.0 - wishart_alpha_sq(theta2, cfg.c)) / m;
    const double wishart_ratio = sd_d * sd_d / wishart_var;
    GridRow main_row;
    main_row.values = {{"m", double(m)},       {"theta1", theta1},
                       {"theta2", theta2},     {"reps", double(cfg.ks_reps)},
                       {"ks", ks},             {"mean_z", mean_z},
                       {"var_ratio", var_ratio}, {"wishart_ratio", wishart_ratio}};
    result.grid.push_back(main_row);

    // Finite-theta2 scale check.
    std::vector<SlopePoint> pts;
    int grid_index = 1;
    for (int ms : {cfg.ms.front(), cfg.ms.back()}) {
        for (double t1 : {2.0 * cfg.thetas.back(), 8.0 * cfg.thetas.back()}) {
            const double t2 = 5.0;
            const PerturbationSpec p = canonical_spikes(ms, {t1, t2});
            std::vector<double> dd(cfg.reps);
            const std::uint64_t s2 = check_stream(result.check_id, grid_index);
            parallel_for(cfg.reps, [&](int rep) {
                const Matrix w =
                    wishart_noise(ms, cfg.c, stream_seed(cfg.seed, s2, rep));
                const EigenSystem ek = eig_sym(p.conjugate_sqrt(w));
                double dot_tail = 0.0;
                for (int i = 2; i < ms; ++i)
                    dot_tail += ek.vectors(i, 0) * ek.vectors(i, 1);
                dd[rep] = std::fabs(dot_tail);
            });
            GridRow row;
            row.values = {{"m", double(ms)}, {"theta1", t1}, {"theta2", t2},
                          {"reps", double(cfg.reps)},
                          {"median_abs_dot", median(dd)}};
            result.grid.push_back(row);
            pts.push_back({std::log(t1 * ms), std::log(median(dd))});
            ++grid_index;
        }
    }
    const double slope = slope_of(pts);

    result.observed = {{"ks", ks},
                       {"mean_z", mean_z},
                       {"var_ratio", var_ratio},
                       {"wishart_ratio", wishart_ratio},
                       {"finite_theta2_slope", slope}};
    result.notes.push_back(
        "wishart_ratio compares var(dot) with (1-a1^2)(1-a2^2)/m; recorded, "
        "not gated");
    result.pass = ks < 0.1 &&
                  std::fabs(mean_z) <= 3.0 / std::sqrt(double(cfg.ks_reps)) &&
                  var_ratio >= 0.8 && var_ratio <= 1.25 &&
                  slope_ok(slope, -0.5);
    return result;
}

InvarianceCheckResult check_invariant_dot_product(const LabConfig& cfg) {
    InvarianceCheckResult result;
    result.check_id = "invariant-dot";
    result.claim =
        "bulk dot product of two spike eigenvectors matches the two-spike "
        "model; median |difference| scales like 1/(sqrt(theta_s theta_r) m) "
        "(slope -1 +/- 0.3)";
    result.predicted_rate = "1/(sqrt(theta_s theta_r) m)";

    std::vector<SlopePoint> pts;
    int grid_index = 0;
    for (int m : cfg.ms) {
        for (double theta : cfg.thetas) {
            const double t1 = 4.0 * theta, t2 = 2.0 * theta, t3 = theta;
            const PerturbationSpec pk = canonical_spikes(m, {t1, t2, t3});
            const PerturbationSpec psr = canonical_spikes(m, {t1, t2});
            const int k = 3;
            std::vector<double> d(cfg.reps);
            std::vector<std::map<std::string, double>> detail(cfg.reps);
            const std::uint64_t stream = check_stream(result.check_id, grid_index);
            parallel_for(cfg.reps, [&](int rep) {
                const Matrix w =
                    wishart_noise(m, cfg.c, stream_seed(cfg.seed, stream, rep));
                const EigenSystem ek = eig_sym(pk.conjugate_sqrt(w));
                const EigenSystem esr = eig_sym(psr.conjugate_sqrt(w));
                double lhs = 0.0;
                for (int i = 2; i < m; ++i)
                    lhs += esr.vectors(i, 0) * esr.vectors(i, 1);
                double rhs = 0.0;
                for (int i = k; i < m; ++i)
                    rhs += ek.vectors(i, 0) * ek.vectors(i, 1);
                d[rep] = std::fabs(lhs - rhs);
                detail[rep] = {{"m", double(m)}, {"theta", theta},
                               {"rep", double(rep)}, {"d", d[rep]}};
            });
            GridRow row;
            row.values = {{"m", double(m)},   {"theta_s", t1},
                          {"theta_r", t2},    {"reps", double(cfg.reps)},
                          {"median_d", median(d)}};
            result.grid.push_back(row);
            pts.push_back({std::log(std::sqrt(t1 * t2) * m), std::log(median(d))});
            append_detail(result, detail);
            ++grid_index;
        }
    }
    const double slope = slope_of(pts);
    result.observed = {{"slope", slope}};
    result.pass = slope_ok(slope, -1.0);
    return result;
}

InvarianceCheckResult check_component_distribution(const LabConfig& cfg) {
    InvarianceCheckResult result;
    result.check_id = "component-dist";
    result.claim =
        "spike-block component rescaled by sqrt(m)|t1-tk|/sqrt(t1 tk (M2-1)) "
        "and bulk component rescaled by sqrt(m/(1-alpha^2)) are standard "
        "normal (KS < 0.1); residual bulk mass has mean ~ 1/theta1 and "
        "variance ~ 1/(theta1^2 m) (slopes -1 +/- 0.3)";
    result.predicted_rate = "normal limits; RV(O(1/theta), O(1/(theta^2 m)))";

    // Distribution part.
    const int m = cfg.ks_m;
    const double theta1 = 2.0 * cfg.ks_theta, theta2 = cfg.ks_theta;
    const PerturbationSpec pk = canonical_spikes(m, {theta1, theta2});
    std::vector<double> z1(cfg.ks_reps), z2(cfg.ks_reps);
    std::vector<std::map<std::string, double>> detail(cfg.ks_reps);
    const std::uint64_t stream = check_stream(result.check_id, 0);
    parallel_for(cfg.ks_reps, [&](int rep) {
        const Matrix w = wishart_noise(m, cfg.c, stream_seed(cfg.seed, stream, rep));
        const EigenSystem ek = eig_sym(pk.conjugate_sqrt(w));
        const double m2 = w.squaredNorm() / m;
        const double comp = ek.vectors(1, 0);  // component k of eigenvector 1
        z1[rep] = comp * std::sqrt(double(m)) * std::fabs(theta1 - theta2) /
                  std::sqrt(theta1 * theta2 * (m2 - 1.0));
        const double alpha1 = ek.vectors(0, 0) * ek.vectors(0, 0) +
                              ek.vectors(1, 0) * ek.vectors(1, 0);
        z2[rep] = ek.vectors(2, 0) * std::sqrt(double(m) / (1.0 - alpha1));
        detail[rep] = {{"rep", double(rep)}, {"z_spike", z1[rep]},
                       {"z_bulk", z2[rep]}, {"alpha_sq", alpha1}};
    });
    append_detail(result, detail);
    const double ks1 = ks_distance(z1, normal_cdf);
    const double ks2 = ks_distance(z2, normal_cdf);
    GridRow main_row;
    main_row.values = {{"m", double(m)},   {"theta1", theta1},
                       {"theta2", theta2}, {"reps", double(cfg.ks_reps)},
                       {"ks_spike", ks1},  {"ks_bulk", ks2}};
    result.grid.push_back(main_row);

    // Residual-mass scaling part on the slope grid.
    std::vector<SlopePoint> mean_pts, var_pts;
    const int m_max = *std::max_element(cfg.ms.begin(), cfg.ms.end());
    int grid_index = 1;
    for (int ms : cfg.ms) {
        for (double theta : cfg.thetas) {
            const double t1 = 2.0 * theta, t2 = theta;
            const PerturbationSpec p = canonical_spikes(ms, {t1, t2});
            std::vector<double> mass(cfg.reps);
            const std::uint64_t s2 = check_stream(result.check_id, grid_index);
            parallel_for(cfg.reps, [&](int rep) {
                const Matrix w =
                    wishart_noise(ms, cfg.c, stream_seed(cfg.seed, s2, rep));
                const EigenSystem ek = eig_sym(p.conjugate_sqrt(w));
                double alpha1 = 0.0;
                for (int i = 0; i < 2; ++i)
                    alpha1 += ek.vectors(i, 0) * ek.vectors(i, 0);
                mass[rep] = 1.0 - alpha1;
            });
            const double mu = mean(mass);
            const double sd = sample_sd(mass);
            GridRow row;
            row.values = {{"m", double(ms)}, {"theta1", t1}, {"theta2", t2},
                          {"reps", double(cfg.reps)},
                          {"mean_mass", mu}, {"var_mass", sd * sd}};
            result.grid.push_back(row);
            if (ms == m_max) mean_pts.push_back({std::log(t1), std::log(mu)});
            var_pts.push_back({std::log(t1 * t1 * ms), std::log(sd * sd)});
            ++grid_index;
        }
    }
    const double mean_slope = slope_of(mean_pts);
    const double var_slope = slope_of(var_pts);
    result.observed = {{"ks_spike", ks1},
                       {"ks_bulk", ks2},
                       {"mean_mass_slope", mean_slope},
                       {"var_mass_slope", var_slope}};
    result.pass = ks1 < 0.1 && ks2 < 0.1 && slope_ok(mean_slope, -1.0) &&
                  slope_ok(var_slope, -1.0);
    return result;
}

InvarianceCheckResult check_double_angle_invariance(const LabConfig& cfg) {
    InvarianceCheckResult result;
    result.check_id = "double-angle";
    result.claim =
        "squared double angle of the order-1 models matches the order-k "
        "angle sum; median |difference| scales like 1/(theta_s m) "
        "(slope -1 +/- 0.3); extending the sum by eps components moves it "
        "by less than the replication sd";
    result.predicted_rate = "1/(theta_s m)";

    std::vector<SlopePoint> pts;
    bool eps_ok = true;
    int grid_index = 0;
    for (int m : cfg.ms) {
        for (double theta : cfg.thetas) {
            const double t1 = 2.0 * theta, t2 = theta;
            const PerturbationSpec pk = canonical_spikes(m, {t1, t2});
            const PerturbationSpec p1 = single_spike(m, t1, 1);
            const int k = 2;
            std::vector<double> d(cfg.reps), diff(cfg.reps), eps_move(cfg.reps);
            std::vector<std::map<std::string, double>> detail(cfg.reps);
            const std::uint64_t stream = check_stream(result.check_id, grid_index);
            parallel_for(cfg.reps, [&](int rep) {
                const Matrix wx = wishart_noise(
                    m, cfg.c, stream_seed(cfg.seed, stream, 2 * rep));
                const Matrix wy = wishart_noise(
                    m, cfg.c, stream_seed(cfg.seed, stream, 2 * rep + 1));
                const EigenSystem xk = eig_sym(pk.conjugate_sqrt(wx));
                const EigenSystem yk = eig_sym(pk.conjugate_sqrt(wy));
                const EigenSystem x1 = eig_sym(p1.conjugate_sqrt(wx));
                const EigenSystem y1 = eig_sym(p1.conjugate_sqrt(wy));
                const double lhs = std::pow(x1.vectors.col(0).dot(y1.vectors.col(0)), 2);
                double rhs = 0.0;
                for (int i = 0; i < k; ++i)
                    rhs += std::pow(xk.vectors.col(0).dot(yk.vectors.col(i)), 2);
                double rhs_eps = rhs;
                for (int i = k; i < std::min(m, k + cfg.eps); ++i)
                    rhs_eps += std::pow(xk.vectors.col(0).dot(yk.vectors.col(i)), 2);
                d[rep] = std::fabs(lhs - rhs);
                diff[rep] = lhs - rhs;
                eps_move[rep] = std::fabs(rhs_eps - rhs);
                detail[rep] = {{"m", double(m)}, {"theta", theta},
                               {"rep", double(rep)}, {"d", d[rep]},
                               {"eps_move", eps_move[rep]}};
            });
            const double sd_diff = sample_sd(diff);
            if (median(eps_move) > sd_diff) eps_ok = false;
            GridRow row;
            row.values = {{"m", double(m)},          {"theta_s", t1},
                          {"reps", double(cfg.reps)}, {"median_d", median(d)},
                          {"median_eps_move", median(eps_move)},
                          {"sd_diff", sd_diff}};
            result.grid.push_back(row);
            pts.push_back({std::log(t1 * m), std::log(median(d))});
            append_detail(result, detail);
            ++grid_index;
        }
    }
    const double slope = slope_of(pts);
    result.observed = {{"slope", slope}, {"eps_ok", eps_ok ? 1.0 : 0.0}};
    result.pass = slope_ok(slope, -1.0) && eps_ok;
    return result;
}

InvarianceCheckResult check_double_dot(const LabConfig& cfg) {
    InvarianceCheckResult result;
    result.check_id = "double-dot";
    result.claim =
        "coordinates of Y spike eigenvectors in the completed X basis: the "
        "k-block identity holds to 1e-12 on every replication, the (s,s) "
        "coordinate matches u_X(s,s)u_Y(s,s) at rate 1/sqrt(theta_s m) "
        "(slope -0.5 +/- 0.3), and the bulk dot decomposition holds at rate "
        "1/(theta_1 m) (slope -1 +/- 0.3)";
    result.predicted_rate = "1/(theta_1 m) and 1/sqrt(theta_s m)";

    std::vector<SlopePoint> coord_pts, decomp_pts;
    double max_exact = 0.0;
    int grid_index = 0;
    for (int m : cfg.ms) {
        for (double theta : cfg.thetas) {
            const double t1 = 2.0 * theta, t2 = theta;
            const PerturbationSpec pk = canonical_spikes(m, {t1, t2});
            const int k = 2;
            std::vector<double> coord(cfg.reps), decomp(cfg.reps), exact(cfg.reps);
            std::vector<std::map<std::string, double>> detail(cfg.reps);
            const std::uint64_t stream = check_stream(result.check_id, grid_index);
            parallel_for(cfg.reps, [&](int rep) {
                const Matrix wx = wishart_noise(
                    m, cfg.c, stream_seed(cfg.seed, stream, 3 * rep));
                const Matrix wy = wishart_noise(
                    m, cfg.c, stream_seed(cfg.seed, stream, 3 * rep + 1));
                const EigenSystem ex = eig_sym(pk.conjugate_sqrt(wx));
                const EigenSystem ey = eig_sym(pk.conjugate_sqrt(wy));
                const Matrix ux = basis_completion(
                    ex.vectors.leftCols(k),
                    stream_seed(cfg.seed, stream, 3 * rep + 2));
                Matrix ut(m, k);  // ut.col(s) = Ux^t uy_s
                for (int s = 0; s < k; ++s)
                    ut.col(s) = ux.transpose() * ey.vectors.col(s);

                double worst = 0.0;
                for (int s = 0; s < k; ++s) {
                    double lhs = 0.0, rhs = 0.0;
                    for (int i = 0; i < k; ++i) {
                        lhs += ut(i, s) * ut(i, s);
                        rhs += std::pow(ex.vectors.col(i).dot(ey.vectors.col(s)), 2);
                    }
                    worst = std::max(worst, std::fabs(lhs - rhs));
                }
                exact[rep] = worst;

                coord[rep] =
                    std::fabs(ut(0, 0) - ex.vectors(0, 0) * ey.vectors(0, 0));

                double lhs = 0.0;
                for (int i = k; i < m; ++i) lhs += ut(i, 0) * ut(i, 1);
                const auto tail_dot = [&](const Matrix& a, const Matrix& b,
                                          int ca, int cb) {
                    double acc = 0.0;
                    for (int i = k; i < m; ++i) acc += a(i, ca) * b(i, cb);
                    return acc;
                };
                const auto alpha_sq = [&](const EigenSystem& e, int col) {
                    double acc = 0.0;
                    for (int i = 0; i < k; ++i) acc += e.vectors(i, col) * e.vectors(i, col);
                    return acc;
                };
                const double rhs =
                    tail_dot(ey.vectors, ey.vectors, 0, 1) +
                    tail_dot(ex.vectors, ex.vectors, 0, 1) -
                    tail_dot(ex.vectors, ey.vectors, 0, 1) -
                    tail_dot(ey.vectors, ex.vectors, 0, 1) -
                    (ex.vectors(0, 1) + ey.vectors(1, 0)) *
                        (alpha_sq(ex, 0) - alpha_sq(ex, 1));
                decomp[rep] = std::fabs(lhs - rhs);
                detail[rep] = {{"m", double(m)},      {"theta", theta},
                               {"rep", double(rep)},  {"exact", exact[rep]},
                               {"coord", coord[rep]}, {"decomp", decomp[rep]}};
            });
            max_exact = std::max(max_exact, *std::max_element(exact.begin(), exact.end()));
            GridRow row;
            row.values = {{"m", double(m)},           {"theta1", t1},
                          {"theta2", t2},             {"reps", double(cfg.reps)},
                          {"max_exact", *std::max_element(exact.begin(), exact.end())},
                          {"median_coord", median(coord)},
                          {"median_decomp", median(decomp)}};
            result.grid.push_back(row);
            coord_pts.push_back({std::log(t1 * m), std::log(median(coord))});
            decomp_pts.push_back({std::log(t1 * m), std::log(median(decomp))});
            append_detail(result, detail);
            ++grid_index;
        }
    }
    const double coord_slope = slope_of(coord_pts);
    const double decomp_slope = slope_of(decomp_pts);
    result.exact_ok = max_exact < 1e-12;
    result.observed = {{"max_exact", max_exact},
                       {"coord_slope", coord_slope},
                       {"decomp_slope", decomp_slope}};
    result.pass = result.exact_ok && slope_ok(coord_slope, -0.5) &&
                  slope_ok(decomp_slope, -1.0);
    return result;
}

InvarianceCheckResult check_lemma_statw(const LabConfig& cfg) {
    InvarianceCheckResult result;
    result.check_id = "statw";
    result.claim =
        "rank-one eigenvector statistics reduce to W entries: "
        "u(1,2) ~ W12/sqrt(theta) and sum lambda u u ~ (W12 M2 - (W^2)12)/"
        "sqrt(theta) at rate 1/(sqrt(theta) m) (slopes -1 +/- 0.3 in m); "
        "the weighted square sum satisfies its exact trace identity to "
        "1e-8 while its distance to W22 is reported unadjudicated";
    result.predicted_rate = "1/(sqrt(theta) m)";

    const double theta = cfg.ks_theta;
    const PerturbationSpec p1_tpl = single_spike(2, theta, 1);  // placeholder dims
    (void)p1_tpl;
    std::vector<SlopePoint> r1_pts, r3_pts;
    double max_exact = 0.0;
    int grid_index = 0;
    for (int m : cfg.ms) {
        const PerturbationSpec p1 = single_spike(m, theta, 1);
        std::vector<double> r1(cfg.reps), r3(cfg.reps), exact(cfg.reps),
            w22_gap(cfg.reps);
        std::vector<std::map<std::string, double>> detail(cfg.reps);
        const std::uint64_t stream = check_stream(result.check_id, grid_index);
        parallel_for(cfg.reps, [&](int rep) {
            const Matrix w =
                wishart_noise(m, cfg.c, stream_seed(cfg.seed, stream, rep));
            const EigenSystem e = eig_sym(p1.conjugate_sqrt(w));
            const Matrix w2 = w * w;
            const double m2 = w.trace() == 0.0 ? 0.0 : w2.trace() / m;

            r1[rep] = std::fabs(e.vectors(1, 0) - w(0, 1) / std::sqrt(theta));

            double sq_sum = 0.0, cross_sum = 0.0;
            for (int i = 1; i < m; ++i) {
                const double lam = e.spectrum.eigenvalues(i);
                sq_sum += lam * lam * e.vectors(1, i) * e.vectors(1, i);
                cross_sum += lam * e.vectors(0, i) * e.vectors(1, i);
            }
            const double lam1 = e.spectrum.eigenvalues(0);
            const double exact_rhs = w2(1, 1) + (theta - 1.0) * w(0, 1) * w(0, 1) -
                                     lam1 * lam1 * e.vectors(1, 0) * e.vectors(1, 0);
            exact[rep] = std::fabs(sq_sum - exact_rhs) /
                         std::max(1.0, std::fabs(exact_rhs));
            w22_gap[rep] = std::fabs(sq_sum - w(1, 1));

            const double pred_cross =
                (w(0, 1) * m2 - w2(0, 1)) / std::sqrt(theta);
            r3[rep] = std::fabs(cross_sum - pred_cross);
            detail[rep] = {{"m", double(m)},     {"rep", double(rep)},
                           {"r_component", r1[rep]}, {"r_cross", r3[rep]},
                           {"exact", exact[rep]},    {"w22_gap", w22_gap[rep]}};
        });
        max_exact = std::max(max_exact, *std::max_element(exact.begin(), exact.end()));
        GridRow row;
        row.values = {{"m", double(m)},           {"theta", theta},
                      {"reps", double(cfg.reps)}, {"median_r_component", median(r1)},
                      {"median_r_cross", median(r3)},
                      {"median_w22_gap", median(w22_gap)},
                      {"max_exact", *std::max_element(exact.begin(), exact.end())}};
        result.grid.push_back(row);
        r1_pts.push_back({std::log(double(m)), std::log(median(r1))});
        r3_pts.push_back({std::log(double(m)), std::log(median(r3))});
        append_detail(result, detail);
        ++grid_index;
    }
    const double slope1 = slope_of(r1_pts);
    const double slope3 = slope_of(r3_pts);
    result.exact_ok = max_exact < 1e-8;
    result.observed = {{"component_slope", slope1},
                       {"cross_slope", slope3},
                       {"max_exact", max_exact}};
    result.notes.push_back(
        "w22_gap keeps both readings of the squared-sum limit visible "
        "without adjudicating between them");
    result.pass = result.exact_ok && slope_ok(slope1, -1.0) && slope_ok(slope3, -1.0);
    return result;
}

InvarianceCheckResult check_secular_equation(const LabConfig& cfg) {
    InvarianceCheckResult result;
    result.check_id = "secular";
    result.claim =
        "bracketed root of the secular residual above the noise spectrum "
        "matches the top eigenvalue of the perturbed matrix to 1e-8; the "
        "residual vanishes at every solver eigenvalue";
    result.predicted_rate = "exact identity";

    const int m = 50;
    const double theta = 10.0;
    const int reps = std::min(cfg.reps, 100);
    std::vector<double> root_err(reps), resid_at_eig(reps);
    std::vector<std::map<std::string, double>> detail(reps);
    const std::uint64_t stream = check_stream(result.check_id, 0);
    parallel_for(reps, [&](int rep) {
        Rng rng = Rng::for_stream(cfg.seed, stream, 2 * rep);
        const Matrix w =
            wishart_noise(m, cfg.c, stream_seed(cfg.seed, stream, 2 * rep + 1));
        Vector u(m);
        for (int i = 0; i < m; ++i) u(i) = rng.normal();
        u.normalize();
        PerturbationSpec::Spike spike;
        spike.theta = theta;
        spike.u = u;
        const PerturbationSpec p(m, {spike});
        const EigenSystem ew = eig_sym(w);
        Vector angles(m);
        for (int i = 0; i < m; ++i) {
            const double dot = ew.vectors.col(i).dot(u);
            angles(i) = dot * dot;
        }
        const Spectrum sigma = eig_values(p.conjugate_sqrt(w));
        const double lam_top = sigma.eigenvalues(0);

        const double lo0 = ew.spectrum.max_value();
        double lo = lo0 + 1e-9 * std::max(1.0, lo0);
        double hi = theta * (lo0 + 2.0) + 10.0;
        const auto f = [&](double x) {
            return secular_residual(ew.spectrum, angles, theta, x);
        };
        for (int it = 0; it < 60 && f(hi) > 0.0; ++it) hi *= 2.0;
        double a = lo, b = hi;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            (f(mid) > 0.0 ? a : b) = mid;
        }
        const double root = 0.5 * (a + b);
        root_err[rep] = std::fabs(root - lam_top);
        resid_at_eig[rep] = std::fabs(f(lam_top));
        detail[rep] = {{"rep", double(rep)},
                       {"root_err", root_err[rep]},
                       {"resid_at_eig", resid_at_eig[rep]}};
    });
    const double worst_root = *std::max_element(root_err.begin(), root_err.end());
    const double worst_resid =
        *std::max_element(resid_at_eig.begin(), resid_at_eig.end());
    GridRow row;
    row.values = {{"m", double(m)}, {"theta", theta}, {"reps", double(reps)},
                  {"max_root_err", worst_root}, {"max_resid", worst_resid}};
    result.grid.push_back(row);
    append_detail(result, detail);
    result.exact_ok = worst_root < 1e-8 && worst_resid < 1e-8;
    result.observed = {{"max_root_err", worst_root}, {"max_resid", worst_resid}};
    result.pass = result.exact_ok;
    return result;
}

std::vector<std::string> lab_check_ids() {
    return {"eigenvalue-invariance", "angle-invariance", "dot-product",
            "invariant-dot",         "component-dist",   "double-angle",
            "double-dot",            "statw",            "secular"};
}

InvarianceCheckResult run_lab_check(const std::string& id, const LabConfig& cfg) {
    if (id == "eigenvalue-invariance") return check_eigenvalue_invariance(cfg);
    if (id == "angle-invariance") return check_angle_invariance(cfg);
    if (id == "dot-product") return check_dot_product_distribution(cfg);
    if (id == "invariant-dot") return check_invariant_dot_product(cfg);
    if (id == "component-dist") return check_component_distribution(cfg);
    if (id == "double-angle") return check_double_angle_invariance(cfg);
    if (id == "double-dot") return check_double_dot(cfg);
    if (id == "statw") return check_lemma_statw(cfg);
    if (id == "secular") return check_secular_equation(cfg);
    throw InvalidParamError("unknown lab check: " + id);
}

LabConfig parse_lab_config(const std::string& path) {
    LabConfig cfg;
    const auto to_ints = [](const std::string& v) {
        std::vector<int> out;
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!trim_copy(tok).empty()) out.push_back(std::stoi(trim_copy(tok)));
        return out;
    };
    const auto to_doubles = [](const std::string& v) {
        std::vector<double> out;
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!trim_copy(tok).empty()) out.push_back(std::stod(trim_copy(tok)));
        return out;
    };
    for (const auto& [key, value] : parse_kv_file(path)) {
        if (key == "ms") cfg.ms = to_ints(value);
        else if (key == "thetas") cfg.thetas = to_doubles(value);
        else if (key == "reps") cfg.reps = std::stoi(value);
        else if (key == "ks_m") cfg.ks_m = std::stoi(value);
        else if (key == "ks_theta") cfg.ks_theta = std::stod(value);
        else if (key == "ks_reps") cfg.ks_reps = std::stoi(value);
        else if (key == "c") cfg.c = std::stod(value);
        else if (key == "eps") cfg.eps = std::stoi(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else throw InvalidConfigError("unknown lab config key: " + key);
    }
    if (cfg.ms.size() < 2 || cfg.thetas.empty() || cfg.reps < 2)
        throw InvalidConfigError("lab config needs >= 2 ms, >= 1 theta, reps >= 2");
    return cfg;
}

void write_check_outputs(const std::string& out_dir,
                         const InvarianceCheckResult& result) {
    const auto csv_of = [](const std::vector<std::map<std::string, double>>& rows,
                           const std::string& path) {
        if (rows.empty()) return;
        std::set<std::string> keys;
        for (const auto& r : rows)
            for (const auto& [k, v] : r) keys.insert(k);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path);
        bool first = true;
        for (const auto& k : keys) {
            out << (first ? "" : ",") << k;
            first = false;
        }
        out << "\n";
        for (const auto& r : rows) {
            first = true;
            for (const auto& k : keys) {
                const auto it = r.find(k);
                out << (first ? "" : ",")
                    << (it == r.end() ? "" : format_full_precision(it->second));
                first = false;
            }
            out << "\n";
        }
    };
    std::vector<std::map<std::string, double>> grid_rows;
    for (const auto& g : result.grid) grid_rows.push_back(g.values);
    csv_of(grid_rows, out_dir + "/" + result.check_id + ".csv");
    csv_of(result.detail, out_dir + "/" + result.check_id + "_detail.csv");

    nlohmann::json j;
    j["check"] = result.check_id;
    j["claim"] = result.claim;
    j["predicted_rate"] = result.predicted_rate;
    j["observed"] = result.observed;
    j["pass"] = result.pass;
    j["exact_ok"] = result.exact_ok;
    j["notes"] = result.notes;
    std::ofstream out(out_dir + "/" + result.check_id + ".json", std::ios::binary);
    if (!out) throw IoError("cannot write summary for " + result.check_id);
    out << j.dump(2) << "\n";
}

}  // namespace spiketest
