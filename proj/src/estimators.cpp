#include "spiketest/estimators.hpp"

#include <cmath>
#include <limits>

namespace spiketest {

const SpikeEstimate& PopulationFit::spike(int s) const {
    if (s < 1 || s > k) throw DimensionError("PopulationFit: spike index out of range");
    return spikes[static_cast<std::size_t>(s - 1)];
}

bool PopulationFit::all_separated() const {
    for (const auto& s : spikes)
        if (!s.separated) return false;
    return true;
}

double unbiased_theta(const Spectrum& bulk, double theta_hat) {
    require_above_pole(theta_hat, bulk.max_value());
    const double m11 = m_functional(bulk, theta_hat, 1, 1, 0);
    if (m11 <= 0.0)
        throw NonDetectableError("unbiased_theta: bulk functional not positive");
    return 1.0 + 1.0 / m11;
}

double unbiased_theta(const PopulationFit& fit, int s) {
    return unbiased_theta(fit.bulk, fit.spike(s).theta_hat);
}

Detectability check_detectable(double theta_hat, const Spectrum& bulk,
                               double threshold) {
    const double edge = bulk.max_value();
    const double width = edge - bulk.min_value();
    Detectability d;
    if (width <= 0.0) {
        // Degenerate flat bulk: separated iff strictly above it.
        d.separated = theta_hat > edge;
        d.gap_ratio = d.separated ? std::numeric_limits<double>::infinity() : 0.0;
        return d;
    }
    d.gap_ratio = (theta_hat - edge) / width;
    d.separated = d.gap_ratio > threshold;
    return d;
}

Detectability check_detectable(const PopulationFit& fit, int s, double threshold) {
    return check_detectable(fit.spike(s).theta_hat, fit.bulk, threshold);
}

PopulationFit fit_population(const Matrix& cov, int k, int n, double gap_threshold) {
    const int m = static_cast<int>(cov.rows());
    if (m < 2) throw DimensionError("fit_population: need at least a 2x2 matrix");
    if (k < 1) throw InvalidParamError("fit_population: k must be >= 1");
    if (k >= m) throw SpikeCountError("fit_population: k must be smaller than dim");

    EigenSystem es = eig_sym(cov);
    if (!es.spectrum.is_psd(1e-10))
        throw InvalidParamError("fit_population: covariance not PSD within tolerance");

    PopulationFit fit;
    fit.k = k;
    fit.m = m;
    fit.n = n;
    fit.bulk = es.spectrum.drop_top(k);

    fit.spikes.reserve(k);
    for (int s = 1; s <= k; ++s) {
        SpikeEstimate e;
        e.index = s;
        e.theta_hat = es.spectrum.eigenvalues(s - 1);
        e.vector = es.vectors.col(s - 1);
        const Detectability d = check_detectable(e.theta_hat, fit.bulk, gap_threshold);
        e.separated = d.separated;
        e.gap_ratio = d.gap_ratio;
        e.theta_unbiased =
            d.separated ? unbiased_theta(fit.bulk, e.theta_hat) : e.theta_hat;
        fit.spikes.push_back(std::move(e));
    }
    for (int s = 0; s + 1 < k; ++s) {
        if (std::fabs(fit.spikes[s].theta_hat - fit.spikes[s + 1].theta_hat) <
            1e-6 * fit.spikes[s].theta_hat)
            fit.equal_spike_warning = true;
    }
    return fit;
}

void attach_reference_angles(PopulationFit& fit, const Matrix& directions) {
    if (directions.rows() != fit.m)
        throw DimensionError("attach_reference_angles: dimension mismatch");
    for (auto& s : fit.spikes) {
        double acc = 0.0;
        for (int j = 0; j < directions.cols(); ++j) {
            const double dot = s.vector.dot(directions.col(j));
            acc += dot * dot;
        }
        s.alpha_sq = acc;
    }
}

FilteredCovariance::FilteredCovariance(int m, Vector thetas, Matrix vectors)
    : m_(m), thetas_(std::move(thetas)), vectors_(std::move(vectors)) {
    if (vectors_.rows() != m_ && thetas_.size() > 0)
        throw DimensionError("FilteredCovariance: vector dimension mismatch");
    if (vectors_.cols() != thetas_.size())
        throw DimensionError("FilteredCovariance: thetas/vectors count mismatch");
    for (int i = 0; i < thetas_.size(); ++i)
        if (!(thetas_(i) > 0.0))
            throw InvalidParamError("FilteredCovariance: thetas must be positive");
}

FilteredCovariance FilteredCovariance::from_fit(const PopulationFit& fit) {
    Vector thetas(fit.k);
    Matrix vectors(fit.m, fit.k);
    for (int s = 0; s < fit.k; ++s) {
        const auto& e = fit.spikes[static_cast<std::size_t>(s)];
        if (!e.separated)
            throw NonDetectableError("FilteredCovariance: spike not detectable");
        thetas(s) = e.theta_unbiased;
        vectors.col(s) = e.vector;
    }
    return FilteredCovariance(fit.m, std::move(thetas), std::move(vectors));
}

Matrix FilteredCovariance::apply(const Matrix& x) const {
    if (x.rows() != m_) throw DimensionError("FilteredCovariance::apply: dimension mismatch");
    Matrix out = x;
    for (int i = 0; i < thetas_.size(); ++i) {
        out.noalias() +=
            ((thetas_(i) - 1.0) * vectors_.col(i)) * (vectors_.col(i).transpose() * x);
    }
    return out;
}

Matrix FilteredCovariance::apply_inv_sqrt(const Matrix& x) const {
    if (x.rows() != m_)
        throw DimensionError("FilteredCovariance::apply_inv_sqrt: dimension mismatch");
    Matrix out = x;
    for (int i = 0; i < thetas_.size(); ++i) {
        const double c = 1.0 / std::sqrt(thetas_(i)) - 1.0;
        out.noalias() += (c * vectors_.col(i)) * (vectors_.col(i).transpose() * x);
    }
    return out;
}

double FilteredCovariance::log_det() const {
    double acc = 0.0;
    for (int i = 0; i < thetas_.size(); ++i) acc += std::log(thetas_(i));
    return acc;
}

Matrix FilteredCovariance::dense() const {
    return apply(Matrix::Identity(m_, m_));
}

double alpha_sq_theoretical(double theta_unbiased_x, double theta_unbiased_y,
                            double theta_hat_x, double theta_hat_y,
                            const Spectrum& bulk_x, const Spectrum& bulk_y) {
    if (theta_unbiased_x <= 1.0 + 1e-12 || theta_unbiased_y <= 1.0 + 1e-12)
        throw DivisionByZeroError("alpha_sq_theoretical: unbiased theta at 1");
    const double m12x = m_functional(bulk_x, theta_hat_x, 1, 2, 0);
    const double m12y = m_functional(bulk_y, theta_hat_y, 1, 2, 0);
    const double dx = theta_unbiased_x - 1.0;
    const double dy = theta_unbiased_y - 1.0;
    return (theta_unbiased_x * theta_unbiased_y) / (dx * dx * dy * dy) /
           (theta_hat_x * theta_hat_y * m12x * m12y);
}

double wishart_alpha_sq(double theta, double c) {
    const double d = theta - 1.0;
    return (1.0 - c / (d * d)) / (1.0 + c / d);
}

}  // namespace spiketest
