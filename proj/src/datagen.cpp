#include "spiketest/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "spiketest/rng.hpp"

namespace spiketest {

PerturbationSpec::PerturbationSpec(int dim, std::vector<Spike> spikes)
    : dim_(dim), spikes_(std::move(spikes)) {
    if (dim_ < 1) throw DimensionError("PerturbationSpec: dim must be positive");
    std::sort(spikes_.begin(), spikes_.end(),
              [](const Spike& a, const Spike& b) { return a.theta > b.theta; });
    canonical_ = !spikes_.empty();
    for (std::size_t i = 0; i < spikes_.size(); ++i) {
        const auto& s = spikes_[i];
        if (s.theta <= 0.0)
            throw InvalidParamError("PerturbationSpec: theta must be positive");
        if (static_cast<int>(s.u.size()) != dim_)
            throw DimensionError("PerturbationSpec: direction length != dim");
        int nonzero = 0;
        for (int j = 0; j < dim_; ++j)
            if (s.u(j) != 0.0) ++nonzero;
        if (nonzero != 1 || std::fabs(s.u.cwiseAbs().maxCoeff() - 1.0) > 1e-12)
            canonical_ = false;
    }
    for (std::size_t i = 0; i + 1 < spikes_.size(); ++i) {
        if (spikes_[i].theta == spikes_[i + 1].theta)
            throw EqualSpikesError("PerturbationSpec: thetas must be strictly decreasing");
        if (std::fabs(spikes_[i].theta - spikes_[i + 1].theta) <
            1e-6 * spikes_[i].theta)
            equal_warning_ = true;
    }
    for (std::size_t i = 0; i < spikes_.size(); ++i) {
        for (std::size_t j = i; j < spikes_.size(); ++j) {
            const double dot = spikes_[i].u.dot(spikes_[j].u);
            const double target = (i == j) ? 1.0 : 0.0;
            if (std::fabs(dot - target) > 1e-10)
                throw NotOrthonormalError(
                    "PerturbationSpec: spike directions not orthonormal");
        }
    }
}

PerturbationSpec PerturbationSpec::canonical(
    int dim, const std::vector<std::pair<double, int>>& spikes) {
    std::vector<Spike> list;
    list.reserve(spikes.size());
    for (const auto& [theta, idx] : spikes) {
        if (idx < 1 || idx > dim)
            throw DimensionError("PerturbationSpec::canonical: basis index out of range");
        Spike s;
        s.theta = theta;
        s.u = Vector::Zero(dim);
        s.u(idx - 1) = 1.0;
        s.label = "e" + std::to_string(idx);
        list.push_back(std::move(s));
    }
    return PerturbationSpec(dim, std::move(list));
}

Matrix PerturbationSpec::dense() const {
    Matrix p = Matrix::Identity(dim_, dim_);
    for (const auto& s : spikes_) p += (s.theta - 1.0) * s.u * s.u.transpose();
    return p;
}

Matrix PerturbationSpec::dense_sqrt() const {
    Matrix p = Matrix::Identity(dim_, dim_);
    for (const auto& s : spikes_)
        p += (std::sqrt(s.theta) - 1.0) * s.u * s.u.transpose();
    return p;
}

namespace {

Matrix rank_k_scale(const Matrix& x, const std::vector<PerturbationSpec::Spike>& spikes,
                    int dim, bool inverse) {
    if (x.rows() != dim) throw DimensionError("PerturbationSpec: dimension mismatch");
    Matrix out = x;
    for (const auto& s : spikes) {
        const double root = std::sqrt(s.theta);
        const double c = (inverse ? 1.0 / root : root) - 1.0;
        out.noalias() += (c * s.u) * (s.u.transpose() * x);
    }
    return out;
}

}  // namespace

Matrix PerturbationSpec::apply_sqrt(const Matrix& x) const {
    return rank_k_scale(x, spikes_, dim_, false);
}

Matrix PerturbationSpec::apply_inv_sqrt(const Matrix& x) const {
    return rank_k_scale(x, spikes_, dim_, true);
}

Matrix PerturbationSpec::conjugate_sqrt(const Matrix& a) const {
    if (a.rows() != dim_ || a.cols() != dim_)
        throw DimensionError("PerturbationSpec::conjugate_sqrt: dimension mismatch");
    const Matrix left = apply_sqrt(a);
    return apply_sqrt(left.transpose()).transpose();
}

DataMatrix gen_ar1_gaussian(int m, int n, double rho, double sigma,
                            std::uint64_t seed) {
    if (m < 1 || n < 1) throw InvalidParamError("gen_ar1_gaussian: m, n must be >= 1");
    if (!(rho >= 0.0 && rho < 1.0))
        throw InvalidParamError("gen_ar1_gaussian: rho must be in [0,1)");
    if (!(sigma > 0.0)) throw InvalidParamError("gen_ar1_gaussian: sigma must be positive");

    Rng rng(seed);
    DataMatrix data;
    data.values.resize(m, n);
    data.rho = rho;
    data.sigma = sigma;
    data.seed = seed;

    const double carry = std::sqrt(1.0 - rho * rho);
    for (int i = 0; i < m; ++i) data.values(i, 0) = sigma * rng.normal();
    for (int j = 1; j < n; ++j) {
        for (int i = 0; i < m; ++i) {
            data.values(i, j) =
                rho * data.values(i, j - 1) + carry * sigma * rng.normal();
        }
    }
    return data;
}

DataMatrix apply_perturbation(const DataMatrix& data, const PerturbationSpec& p) {
    if (p.dim() != data.m())
        throw DimensionError("apply_perturbation: dimension mismatch");
    DataMatrix out = data;
    out.values = p.apply_sqrt(data.values);
    return out;
}

Matrix sample_covariance(const DataMatrix& data) {
    const int m = data.m();
    Matrix cov = Matrix::Zero(m, m);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(data.values,
                                                   1.0 / data.n());
    cov.triangularView<Eigen::StrictlyUpper>() =
        cov.transpose().triangularView<Eigen::StrictlyUpper>();
    return cov;
}

}  // namespace spiketest
