#include "spiketest/two_sample.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spiketest/kv.hpp"
#include "spiketest/stat_math.hpp"

namespace spiketest {

const char* method_name(Method m) {
    switch (m) {
        case Method::T1: return "T1";
        case Method::T2: return "T2";
        case Method::T3: return "T3";
        case Method::T4: return "T4";
        case Method::T5: return "T5";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    for (Method m : {Method::T1, Method::T2, Method::T3, Method::T4, Method::T5})
        if (name == method_name(m)) return m;
    throw InvalidParamError("unknown method: " + name);
}

bool TestReport::rejected(double level) const {
    const auto it = reject_at.find(level);
    if (it != reject_at.end()) return it->second;
    if (p_value) return *p_value < level;
    throw MissingCalibrationError("TestReport: no decision recorded for level");
}

std::string TestReport::to_json() const {
    nlohmann::json j;
    j["method"] = method_name(method);
    j["statistic"] = statistic;
    j["reference"] = reference;
    if (p_value) j["p_value"] = *p_value;
    nlohmann::json rej = nlohmann::json::object();
    for (const auto& [level, r] : reject_at) {
        std::ostringstream key;
        key << level;
        rej[key.str()] = r;
    }
    j["reject_at"] = rej;
    j["per_spike"] = per_spike;
    if (!diagnostics.empty()) j["diagnostics"] = diagnostics;
    return j.dump(2);
}

double sigma_theta_sq(const Spectrum& bulk_x, const Spectrum& bulk_y,
                      double rho_x, double rho_y) {
    const double m11x = m_functional(bulk_x, rho_x, 1, 1, 0);
    const double m22x = m_functional(bulk_x, rho_x, 2, 2, 0);
    const double m11y = m_functional(bulk_y, rho_y, 1, 1, 0);
    const double m22y = m_functional(bulk_y, rho_y, 2, 2, 0);
    return 2.0 * (m22x - m11x * m11x) / std::pow(m11x, 4) +
           2.0 * (m22y - m11y * m11y) / std::pow(m11y, 4);
}

namespace {

struct MFuncs {
    double rho;    // plug-in for the limit eigenvalue (raw spiked eigenvalue)
    double theta;  // plug-in for the population spike (bias-corrected)
    double m11, m12, m13, m14, m24;
};

MFuncs m_funcs(const Spectrum& bulk, double rho, double theta) {
    MFuncs f;
    f.rho = rho;
    f.theta = theta;
    f.m11 = m_functional(bulk, rho, 1, 1, 0);
    f.m12 = m_functional(bulk, rho, 1, 2, 0);
    f.m13 = m_functional(bulk, rho, 1, 3, 0);
    f.m14 = m_functional(bulk, rho, 1, 4, 0);
    f.m24 = m_functional(bulk, rho, 2, 4, 0);
    return f;
}

void check_pair(const PopulationFit& x, const PopulationFit& y, bool force) {
    if (x.m != y.m) throw DimensionError("two-sample test: dimensions differ");
    if (x.k != y.k) throw MismatchedKError("two-sample test: spike counts differ");
    if (!force && (x.equal_spike_warning || y.equal_spike_warning))
        throw EqualSpikesError(
            "two-sample test: nearly equal spikes (pass force to override)");
    if (!x.all_separated() || !y.all_separated())
        throw NonDetectableError("two-sample test: spike below separation threshold");
}

}  // namespace

Eigen::Matrix3d JointCovariance3::dense() const {
    Eigen::Matrix3d s;
    s << s11, 0.0, s13, 0.0, s22, s23, s13, s23, s33;
    return s;
}

JointCovariance3 joint_covariance(const PopulationFit& fit_x,
                                  const PopulationFit& fit_y, int s) {
    const auto& sx = fit_x.spike(s);
    const auto& sy = fit_y.spike(s);
    const MFuncs x = m_funcs(fit_x.bulk, sx.theta_hat, sx.theta_unbiased);
    const MFuncs y = m_funcs(fit_y.bulk, sy.theta_hat, sy.theta_unbiased);

    JointCovariance3 out;
    out.theta_hat_x = x.rho;
    out.theta_unbiased_x = x.theta;
    out.theta_hat_y = y.rho;
    out.theta_unbiased_y = y.theta;

    const double tx = x.theta, ty = y.theta;
    const double dx = tx - 1.0, dy = ty - 1.0;

    out.s11 = -2.0 * (x.m11 + x.m11 * x.m11 - x.m12 * x.rho) / std::pow(x.m11, 4);
    out.s22 = -2.0 * (y.m11 + y.m11 * y.m11 - y.m12 * y.rho) / std::pow(y.m11, 4);

    out.s13 = 2.0 *
              (x.m11 * (1.0 + x.m11) * x.m12 +
               x.m11 * (x.m12 * x.m12 - 2.0 * (1.0 + x.m11) * x.m13) * x.rho +
               x.m12 * x.m13 * x.rho * x.rho) *
              tx * ty /
              (x.m11 * x.m11 * std::pow(x.m12, 3) * y.m12 * x.rho * x.rho * y.rho *
               dx * dx * dy * dy);

    out.s23 = 2.0 *
              (y.m11 * (1.0 + y.m11) * y.m12 +
               y.m11 * (y.m12 * y.m12 - 2.0 * (1.0 + y.m11) * y.m13) * y.rho +
               y.m12 * y.m13 * y.rho * y.rho) *
              tx * ty /
              (x.m12 * y.m11 * y.m11 * std::pow(y.m12, 3) * x.rho * y.rho * y.rho *
               dx * dx * dy * dy);

    const double big =
        2.0 * std::pow(x.m12, 5) * std::pow(y.m12, 4) * std::pow(x.rho, 3) *
            y.rho * y.rho * dx * dx * (y.m12 * y.rho * dy * dy - ty) -
        (1.0 + 2.0 * x.m11) * std::pow(x.m12, 3) * std::pow(y.m12, 4) * x.rho *
            y.rho * y.rho * tx * ty +
        4.0 * x.m11 * (1.0 + x.m11) * x.m12 * x.m13 * std::pow(y.m12, 4) * x.rho *
            y.rho * y.rho * tx * ty -
        4.0 * x.m11 * (1.0 + x.m11) * x.m13 * x.m13 * std::pow(y.m12, 4) * x.rho *
            x.rho * y.rho * y.rho * tx * ty +
        x.m12 * x.m12 * std::pow(y.m12, 4) *
            (-x.m11 * (1.0 + x.m11) + (1.0 + 4.0 * x.m11) * x.m13 * x.rho * x.rho +
             x.m14 * std::pow(x.rho, 3)) *
            y.rho * y.rho * tx * ty -
        std::pow(x.m12, 4) * x.rho * x.rho * tx *
            (2.0 * std::pow(y.m12, 5) * std::pow(y.rho, 3) * dy * dy +
             (1.0 + 2.0 * y.m11) * std::pow(y.m12, 3) * y.rho * ty -
             4.0 * y.m11 * (1.0 + y.m11) * y.m12 * y.m13 * y.rho * ty +
             4.0 * y.m11 * (1.0 + y.m11) * y.m13 * y.m13 * y.rho * y.rho * ty +
             y.m12 * y.m12 *
                 (y.m11 * (1.0 + y.m11) -
                  (2.0 * y.m13 + 4.0 * y.m11 * y.m13 + y.m24) * y.rho * y.rho) *
                 ty);

    out.s33 = 2.0 * tx * ty * big /
              (std::pow(x.m12, 6) * std::pow(y.m12, 6) * std::pow(x.rho, 4) *
               std::pow(y.rho, 4) * std::pow(dx, 4) * std::pow(dy, 4));

    const Eigen::Matrix3d sigma = out.dense();
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sigma);
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    out.psd_ok = es.eigenvalues().minCoeff() >= -1e-8 * scale;
    return out;
}

namespace {

// dtheta_unbiased/dtheta_hat at rho.
double theta_unbiased_slope(const Spectrum& bulk, double rho) {
    const double m11 = m_functional(bulk, rho, 1, 1, 0);
    const double m12 = m_functional(bulk, rho, 1, 2, 0);
    return m12 / (m11 * m11);
}

// One population's factor of the angle centering and its rho-derivative:
// h(rho) = t/(t-1)^2 / (rho M12), alpha^2 = h_X h_Y.
void angle_factor(const Spectrum& bulk, double rho, double& h, double& dh) {
    const double m11 = m_functional(bulk, rho, 1, 1, 0);
    const double m12 = m_functional(bulk, rho, 1, 2, 0);
    const double m13 = m_functional(bulk, rho, 1, 3, 0);
    const double t = 1.0 + 1.0 / m11;
    const double tp = m12 / (m11 * m11);
    const double d = t - 1.0;
    h = t / (d * d) / (rho * m12);
    const double m12p = -2.0 * m13;
    dh = -tp * (t + 1.0) / (d * d * d) / (rho * m12) -
         t / (d * d) * (m12 + rho * m12p) / (rho * rho * m12 * m12);
}

}  // namespace

Eigen::Matrix<double, 3, 2> grad_g(const PopulationFit& fit_x,
                                   const PopulationFit& fit_y, int s) {
    const double rx = fit_x.spike(s).theta_hat;
    const double ry = fit_y.spike(s).theta_hat;
    double hx, dhx, hy, dhy;
    angle_factor(fit_x.bulk, rx, hx, dhx);
    angle_factor(fit_y.bulk, ry, hy, dhy);

    Eigen::Matrix<double, 3, 2> g;
    g(0, 0) = theta_unbiased_slope(fit_x.bulk, rx);
    g(1, 0) = -theta_unbiased_slope(fit_y.bulk, ry);
    g(2, 0) = 0.0;
    g(0, 1) = -dhx * hy;
    g(1, 1) = -hx * dhy;
    g(2, 1) = 1.0;
    return g;
}

Eigen::Matrix<double, 3, 2> grad_g_fd(const PopulationFit& fit_x,
                                      const PopulationFit& fit_y, int s,
                                      double step) {
    const double rx = fit_x.spike(s).theta_hat;
    const double ry = fit_y.spike(s).theta_hat;

    const auto g_pair = [&](double rho_x, double rho_y) {
        const double tux = unbiased_theta(fit_x.bulk, rho_x);
        const double tuy = unbiased_theta(fit_y.bulk, rho_y);
        const double alpha = alpha_sq_theoretical(tux, tuy, rho_x, rho_y,
                                                  fit_x.bulk, fit_y.bulk);
        return std::make_pair(tux - tuy, -alpha);
    };

    Eigen::Matrix<double, 3, 2> g;
    const auto [g1_xp, g2_xp] = g_pair(rx + step, ry);
    const auto [g1_xm, g2_xm] = g_pair(rx - step, ry);
    g(0, 0) = (g1_xp - g1_xm) / (2.0 * step);
    g(0, 1) = (g2_xp - g2_xm) / (2.0 * step);
    const auto [g1_yp, g2_yp] = g_pair(rx, ry + step);
    const auto [g1_ym, g2_ym] = g_pair(rx, ry - step);
    g(1, 0) = (g1_yp - g1_ym) / (2.0 * step);
    g(1, 1) = (g2_yp - g2_ym) / (2.0 * step);
    g(2, 0) = 0.0;
    g(2, 1) = 1.0;
    return g;
}

TestReport t1(const PopulationFit& fit_x, const PopulationFit& fit_y,
              double level, bool force) {
    check_pair(fit_x, fit_y, force);
    const int k = fit_x.k;
    const double m = static_cast<double>(fit_x.m);

    TestReport report;
    report.method = Method::T1;
    report.reference = "chi-squared(" + std::to_string(k) + ")";

    double stat = 0.0;
    for (int s = 1; s <= k; ++s) {
        const double diff =
            fit_x.spike(s).theta_unbiased - fit_y.spike(s).theta_unbiased;
        const double var = sigma_theta_sq(fit_x.bulk, fit_y.bulk,
                                          fit_x.spike(s).theta_hat,
                                          fit_y.spike(s).theta_hat);
        double term;
        if (var > 0.0) {
            term = m * diff * diff / var;
        } else if (diff == 0.0) {
            term = 0.0;
        } else {
            term = std::numeric_limits<double>::infinity();
            report.diagnostics.push_back("spike " + std::to_string(s) +
                                         ": zero variance with nonzero difference");
        }
        report.per_spike.push_back(term);
        stat += term;
    }
    report.statistic = stat;
    report.p_value = std::isinf(stat) ? 0.0 : chi2_survival(stat, k);
    report.reject_at[level] = *report.p_value < level;
    return report;
}

TestReport t2(const PopulationFit& fit_x, const PopulationFit& fit_y,
              double level, bool force) {
    check_pair(fit_x, fit_y, force);
    const int k = fit_x.k;
    const double m = static_cast<double>(fit_x.m);

    TestReport report;
    report.method = Method::T2;
    report.reference = "chi-squared(" + std::to_string(2 * k) + ")";

    double stat = 0.0;
    for (int s = 1; s <= k; ++s) {
        const auto& sx = fit_x.spike(s);
        const auto& sy = fit_y.spike(s);

        double angle_sum = 0.0;
        for (int j = 1; j <= k; ++j) {
            const double dot = sx.vector.dot(fit_y.spike(j).vector);
            angle_sum += dot * dot;
        }
        const double alpha = alpha_sq_theoretical(
            sx.theta_unbiased, sy.theta_unbiased, sx.theta_hat, sy.theta_hat,
            fit_x.bulk, fit_y.bulk);

        Eigen::Vector2d v(sx.theta_unbiased - sy.theta_unbiased,
                          angle_sum - alpha);

        const JointCovariance3 joint = joint_covariance(fit_x, fit_y, s);
        if (!joint.psd_ok)
            report.diagnostics.push_back("spike " + std::to_string(s) +
                                         ": joint covariance not PSD within tolerance");
        const Eigen::Matrix<double, 3, 2> g = grad_g(fit_x, fit_y, s);
        const Eigen::Matrix2d sigma_t2 = g.transpose() * joint.dense() * g;

        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sigma_t2);
        const double lmin = es.eigenvalues().minCoeff();
        const double lmax = es.eigenvalues().maxCoeff();
        double term;
        if (v.norm() == 0.0) {
            term = 0.0;
        } else if (lmin <= 0.0 || lmax / lmin > 1e12) {
            throw SingularCovarianceError("t2: singular transformed covariance");
        } else {
            term = m * v.dot(sigma_t2.ldlt().solve(v));
        }
        report.per_spike.push_back(term);
        stat += term;
    }
    report.statistic = stat;
    report.p_value = chi2_survival(stat, 2 * k);
    report.reject_at[level] = *report.p_value < level;
    return report;
}

ResidualSpikePair t3_closed_form(double theta_x, double theta_y, double a) {
    if (!(theta_x > 1.0) || !(theta_y > 1.0))
        throw InvalidParamError("t3: bias-corrected thetas must exceed 1");
    if (a < 0.0 && a > -1e-12) a = 0.0;
    if (a > 1.0 && a < 1.0 + 1e-12) a = 1.0;
    if (a < 0.0 || a > 1.0) throw InvalidParamError("t3: angle outside [0,1]");

    ResidualSpikePair out;
    const double s = 1.0 + theta_x * theta_y - a * (theta_x - 1.0) * (theta_y - 1.0);
    double radicand = s * s - 4.0 * theta_x * theta_y;
    if (radicand < 0.0) {
        radicand = 0.0;
        out.radicand_clamped = true;
    }
    const double root = std::sqrt(radicand);
    const double base = theta_y + a - theta_y * a;
    out.lambda_plus = 0.5 * (base + (1.0 + (theta_y - 1.0) * a + root) / theta_x);
    out.lambda_minus = 0.5 * (base + (1.0 + (theta_y - 1.0) * a - root) / theta_x);
    return out;
}

ResidualSpikePair t3_gram(double theta_x, double theta_y, double a) {
    if (!(theta_x > 1.0) || !(theta_y > 1.0))
        throw InvalidParamError("t3: bias-corrected thetas must exceed 1");
    a = std::clamp(a, 0.0, 1.0);

    // Two-dimensional reduction: u_X = e1, u_Y = (sqrt(a), sqrt(1-a)),
    // v = filtered_X^{-1/2} u_Y.
    Vector ux(2), v(2);
    ux << 1.0, 0.0;
    v << std::sqrt(a / theta_x), std::sqrt(1.0 - a);
    const double vnorm2 = v.squaredNorm();

    std::vector<double> weights;
    std::vector<Vector> vectors;
    if (vnorm2 > 0.0) {
        weights.push_back((theta_y - 1.0) * vnorm2);
        vectors.push_back(v / v.norm());
    }
    weights.push_back(1.0 / theta_x - 1.0);
    vectors.push_back(ux);

    const Spectrum eigs = gram_spectrum(weights, vectors);
    ResidualSpikePair out;
    out.lambda_plus = 1.0 + eigs.max_value();
    out.lambda_minus = 1.0 + eigs.min_value();
    return out;
}

ResidualSpikePair t3_residual_spikes(const PopulationFit& fit_x,
                                     const PopulationFit& fit_y, int s,
                                     bool force) {
    check_pair(fit_x, fit_y, force);
    const auto& sy = fit_y.spike(s);
    double a = 0.0;
    for (int i = 1; i <= fit_x.k; ++i) {
        const double dot = sy.vector.dot(fit_x.spike(i).vector);
        a += dot * dot;
    }
    return t3_closed_form(fit_x.spike(s).theta_unbiased, sy.theta_unbiased, a);
}

double NullCalibration::quantile(double q) const {
    if (samples.empty()) throw MissingCalibrationError("calibration has no samples");
    if (q <= 0.0) return samples.front();
    if (q >= 1.0) return samples.back();
    const double pos = q * static_cast<double>(samples.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= samples.size()) return samples.back();
    return samples[lo] * (1.0 - frac) + samples[lo + 1] * frac;
}

void NullCalibration::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "format = spiketest-calibration-v1\n";
    out << "stat = " << method_name(stat) << "\n";
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash));
    out << "config_hash = " << hash_hex << "\n";
    out << "reps = " << reps << "\n";
    out << "m = " << m << "\n";
    out << "k = " << k << "\n";
    char buf[64];
    const auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (std::size_t s = 0; s < lambda_plus.size(); ++s) {
        const std::string p = "spike." + std::to_string(s + 1) + ".";
        out << p << "lambda_plus = " << fmt(lambda_plus[s]) << "\n";
        out << p << "sigma_plus = " << fmt(sigma_plus[s]) << "\n";
        out << p << "lambda_minus = " << fmt(lambda_minus[s]) << "\n";
        out << p << "sigma_minus = " << fmt(sigma_minus[s]) << "\n";
    }
    for (std::size_t i = 0; i < samples.size(); ++i)
        out << "sample." << (i + 1) << " = " << fmt(samples[i]) << "\n";
}

NullCalibration NullCalibration::load(const std::string& path) {
    NullCalibration cal;
    bool format_seen = false;
    std::map<int, double> sample_map;
    std::map<std::string, std::map<int, double>> spike_map;

    for (const auto& [key, value] : parse_kv_file(path)) {
        if (key == "format") {
            if (value != "spiketest-calibration-v1")
                throw MissingCalibrationError("unsupported calibration format: " + value);
            format_seen = true;
        } else if (key == "stat") {
            cal.stat = method_from_name(value);
        } else if (key == "config_hash") {
            cal.config_hash = std::stoull(value, nullptr, 16);
        } else if (key == "reps") {
            cal.reps = std::stoi(value);
        } else if (key == "m") {
            cal.m = std::stoi(value);
        } else if (key == "k") {
            cal.k = std::stoi(value);
        } else if (key.rfind("sample.", 0) == 0) {
            sample_map[std::stoi(key.substr(7))] = std::stod(value);
        } else if (key.rfind("spike.", 0) == 0) {
            const auto rest = key.substr(6);
            const auto dot = rest.find('.');
            if (dot == std::string::npos)
                throw MissingCalibrationError("bad calibration key: " + key);
            spike_map[rest.substr(dot + 1)][std::stoi(rest.substr(0, dot))] =
                std::stod(value);
        } else {
            throw MissingCalibrationError("unknown calibration key: " + key);
        }
    }
    if (!format_seen) throw MissingCalibrationError("missing calibration format line");

    for (const auto& [idx, v] : sample_map) {
        if (idx != static_cast<int>(cal.samples.size()) + 1)
            throw MissingCalibrationError("calibration samples not contiguous");
        cal.samples.push_back(v);
    }
    const auto fill = [&](const char* name, std::vector<double>& dst) {
        for (const auto& [idx, v] : spike_map[name]) {
            if (idx != static_cast<int>(dst.size()) + 1)
                throw MissingCalibrationError("calibration spikes not contiguous");
            dst.push_back(v);
        }
    };
    fill("lambda_plus", cal.lambda_plus);
    fill("sigma_plus", cal.sigma_plus);
    fill("lambda_minus", cal.lambda_minus);
    fill("sigma_minus", cal.sigma_minus);
    return cal;
}

TestReport t3_test(const PopulationFit& fit_x, const PopulationFit& fit_y,
                   double level, const NullCalibration& cal, bool force) {
    check_pair(fit_x, fit_y, force);
    const int k = fit_x.k;
    if (cal.stat != Method::T3)
        throw MissingCalibrationError("t3_test: calibration is for another statistic");
    if (static_cast<int>(cal.lambda_plus.size()) != k || cal.m != fit_x.m)
        throw MissingCalibrationError("t3_test: calibration does not match (m, k)");

    const double sqrt_m = std::sqrt(static_cast<double>(fit_x.m));
    const double z_hi = normal_quantile(1.0 - level / (2.0 * k));
    const double z_lo = normal_quantile(level / (2.0 * k));

    TestReport report;
    report.method = Method::T3;
    report.reference = "calibrated residual spikes (reps=" +
                       std::to_string(cal.reps) + ")";

    double max_plus = -std::numeric_limits<double>::infinity();
    double min_minus = std::numeric_limits<double>::infinity();
    for (int s = 1; s <= k; ++s) {
        const ResidualSpikePair pair = t3_residual_spikes(fit_x, fit_y, s, force);
        if (pair.radicand_clamped)
            report.diagnostics.push_back("spike " + std::to_string(s) +
                                         ": radicand clamped (complex root)");
        const double zp =
            sqrt_m * (pair.lambda_plus - cal.lambda_plus[s - 1]) / cal.sigma_plus[s - 1];
        const double zm = sqrt_m * (pair.lambda_minus - cal.lambda_minus[s - 1]) /
                          cal.sigma_minus[s - 1];
        report.per_spike.push_back(zp);
        report.per_spike.push_back(zm);
        max_plus = std::max(max_plus, zp);
        min_minus = std::min(min_minus, zm);
    }
    report.statistic = max_plus;
    report.reject_at[level] = (max_plus > z_hi) || (min_minus < z_lo);
    return report;
}

namespace {

// Nonzero eigenvalues of covX^{+/2} covY covX^{+/2} via the reduced
// r x r problem on covX's nonzero eigenspace.
Spectrum whitened_spectrum(const Matrix& cov_x, const Matrix& cov_y, int* rank_out) {
    if (cov_x.rows() != cov_y.rows())
        throw DimensionError("whitened_spectrum: dimension mismatch");
    const EigenSystem ex = eig_sym(cov_x);
    const double thr_x = 1e-10 * std::max(0.0, ex.spectrum.max_value());
    int r = 0;
    while (r < ex.spectrum.dim && ex.spectrum.eigenvalues(r) > thr_x) ++r;
    if (rank_out) *rank_out = r;
    if (r == 0) return Spectrum(Vector::Zero(1));

    const Matrix vr = ex.vectors.leftCols(r);
    Vector inv_sqrt(r);
    for (int i = 0; i < r; ++i)
        inv_sqrt(i) = 1.0 / std::sqrt(ex.spectrum.eigenvalues(i));
    const Matrix reduced = inv_sqrt.asDiagonal() * (vr.transpose() * cov_y * vr) *
                           inv_sqrt.asDiagonal();
    return eig_sym(reduced).spectrum;
}

}  // namespace

double t4_logdet(const Matrix& cov_x, const Matrix& cov_y, int* rank_out) {
    const Spectrum spec = whitened_spectrum(cov_x, cov_y, rank_out);
    const double thr = 1e-10 * std::max(0.0, spec.max_value());
    double acc = 0.0;
    for (int i = 0; i < spec.dim; ++i)
        if (spec.eigenvalues(i) > thr) acc += std::log(spec.eigenvalues(i));
    return acc;
}

double t5_trace(const Matrix& cov_x, const Matrix& cov_y, int* rank_out) {
    const Spectrum spec = whitened_spectrum(cov_x, cov_y, rank_out);
    double acc = 0.0;
    for (int i = 0; i < spec.dim; ++i)
        if (spec.eigenvalues(i) > 0.0) acc += spec.eigenvalues(i);
    return acc;
}

namespace {

TestReport empirical_two_sided(Method method, double stat, double level,
                               const NullCalibration& cal, int rank) {
    if (cal.stat != method)
        throw MissingCalibrationError("calibration is for another statistic");
    if (cal.samples.empty())
        throw MissingCalibrationError("calibration has no quantile samples");
    TestReport report;
    report.method = method;
    report.statistic = stat;
    report.reference = "empirical null (reps=" + std::to_string(cal.reps) + ")";
    const double lo = cal.quantile(level / 2.0);
    const double hi = cal.quantile(1.0 - level / 2.0);
    report.reject_at[level] = stat < lo || stat > hi;
    const double n = static_cast<double>(cal.samples.size());
    double below = 0.0;
    for (double v : cal.samples)
        if (v <= stat) below += 1.0;
    const double cdf = (below + 0.5) / (n + 1.0);
    report.p_value = std::clamp(2.0 * std::min(cdf, 1.0 - cdf), 0.0, 1.0);
    report.diagnostics.push_back("rank = " + std::to_string(rank));
    return report;
}

}  // namespace

TestReport t4_test(const Matrix& cov_x, const Matrix& cov_y, double level,
                   const NullCalibration& cal) {
    int rank = 0;
    const double stat = t4_logdet(cov_x, cov_y, &rank);
    return empirical_two_sided(Method::T4, stat, level, cal, rank);
}

TestReport t5_test(const Matrix& cov_x, const Matrix& cov_y, double level,
                   const NullCalibration& cal) {
    int rank = 0;
    const double stat = t5_trace(cov_x, cov_y, &rank);
    return empirical_two_sided(Method::T5, stat, level, cal, rank);
}

}  // namespace spiketest
