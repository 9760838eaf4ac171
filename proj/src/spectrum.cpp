#include "spiketest/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spiketest {

Spectrum::Spectrum(Vector values) : eigenvalues(std::move(values)) {
    dim = static_cast<int>(eigenvalues.size());
    if (dim == 0) throw DimensionError("Spectrum: empty eigenvalue list");
    std::sort(eigenvalues.data(), eigenvalues.data() + dim,
              std::greater<double>());
    trace_normalized = std::fabs(mean_value() - 1.0) < 1e-9;
}

bool Spectrum::is_psd(double tol) const {
    return min_value() >= -tol * std::max(1.0, std::fabs(max_value()));
}

Spectrum Spectrum::drop_top(int skip) const {
    if (skip < 0 || skip >= dim)
        throw DimensionError("Spectrum::drop_top: skip out of range");
    return Spectrum(eigenvalues.tail(dim - skip));
}

void require_above_pole(double rho, double max_eigenvalue) {
    const double margin = 1e-10 * std::max(1.0, std::fabs(rho));
    if (rho <= max_eigenvalue + margin)
        throw PoleViolationError("evaluation point not above the spectrum");
}

namespace {

void fix_column_sign(Matrix& v, int col, int preferred_component) {
    const int m = static_cast<int>(v.rows());
    int pivot = preferred_component;
    if (pivot < 0 || pivot >= m || std::fabs(v(pivot, col)) <= 1e-12) {
        v.col(col).cwiseAbs().maxCoeff(&pivot);
    }
    if (v(pivot, col) < 0.0) v.col(col) = -v.col(col);
}

}  // namespace

EigenSystem eig_sym(const Matrix& a, SignConvention convention) {
    if (a.rows() != a.cols()) throw DimensionError("eig_sym: matrix not square");
    const double scale = a.cwiseAbs().maxCoeff();
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (scale > 0.0 && asym > 1e-9 * scale)
        throw NonSymmetricError("eig_sym: input asymmetry above tolerance");

    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()));
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("eig_sym: eigensolver failed to converge");

    const int m = static_cast<int>(a.rows());
    EigenSystem es;
    es.sign_convention = convention;
    Vector vals(m);
    es.vectors.resize(m, m);
    for (int i = 0; i < m; ++i) {
        vals(i) = solver.eigenvalues()(m - 1 - i);
        es.vectors.col(i) = solver.eigenvectors().col(m - 1 - i);
    }
    es.spectrum = Spectrum(vals);
    for (int i = 0; i < m; ++i) {
        fix_column_sign(es.vectors, i,
                        convention == SignConvention::diagonal_positive ? i : -1);
    }
    return es;
}

Spectrum eig_values(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("eig_values: matrix not square");
    const double scale = a.cwiseAbs().maxCoeff();
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (scale > 0.0 && asym > 1e-9 * scale)
        throw NonSymmetricError("eig_values: input asymmetry above tolerance");
    Eigen::SelfAdjointEigenSolver<Matrix> solver;
    solver.compute(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("eig_values: eigensolver failed to converge");
    return Spectrum(solver.eigenvalues());
}

void apply_component_sign(EigenSystem& es, int component, int count) {
    if (component < 0 || component >= es.vectors.rows())
        throw DimensionError("apply_component_sign: component out of range");
    count = std::min<int>(count, static_cast<int>(es.vectors.cols()));
    for (int i = 0; i < count; ++i) fix_column_sign(es.vectors, i, component);
}

double m_functional(const Spectrum& spec, double rho, int s1, int s2, int skip) {
    if (s1 < 0 || s2 < 0)
        throw InvalidParamError("m_functional: exponents must be nonnegative");
    if (skip < 0 || skip >= spec.dim)
        throw DimensionError("m_functional: skip out of range");
    const int m = spec.dim;
    const auto retained = spec.eigenvalues.tail(m - skip);
    if (s2 > 0) require_above_pole(rho, retained.maxCoeff());
    double acc = 0.0;
    for (int i = 0; i < retained.size(); ++i) {
        const double lam = retained(i);
        acc += std::pow(lam, s1) / std::pow(rho - lam, s2);
    }
    return acc / static_cast<double>(m - skip);
}

double t_transform(const Spectrum& spec, double z, int skip) {
    if (skip < 0 || skip >= spec.dim)
        throw DimensionError("t_transform: skip out of range");
    const int m = spec.dim;
    const auto retained = spec.eigenvalues.tail(m - skip);
    require_above_pole(z, retained.maxCoeff());
    double acc = 0.0;
    for (int i = 0; i < retained.size(); ++i)
        acc += retained(i) / (z - retained(i));
    return acc / static_cast<double>(m);
}

Spectrum gram_spectrum(const std::vector<double>& weights,
                       const std::vector<Vector>& vectors) {
    const int k = static_cast<int>(weights.size());
    if (k == 0 || vectors.size() != weights.size())
        throw DimensionError("gram_spectrum: weights/vectors size mismatch");
    const int m = static_cast<int>(vectors[0].size());
    if (k > m) throw DimensionError("gram_spectrum: more terms than dimensions");
    for (const auto& v : vectors)
        if (static_cast<int>(v.size()) != m)
            throw DimensionError("gram_spectrum: inconsistent vector lengths");
    for (double w : weights)
        if (w == 0.0) throw InvalidParamError("gram_spectrum: zero weight");

    Matrix h(k, k);
    for (int i = 0; i < k; ++i) {
        const double si = weights[i] >= 0.0 ? 1.0 : -1.0;
        for (int j = 0; j < k; ++j) {
            h(i, j) = si * std::sqrt(std::fabs(weights[i] * weights[j])) *
                      vectors[i].dot(vectors[j]);
        }
    }

    const double hscale = h.cwiseAbs().maxCoeff();
    if ((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * hscale) {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (h + h.transpose()));
        if (solver.info() != Eigen::Success)
            throw ConvergenceError("gram_spectrum: eigensolver failed");
        return Spectrum(solver.eigenvalues());
    }

    // Mixed signs: H is similar to the restriction of a symmetric operator,
    // so its spectrum is real even though H itself is not symmetric.
    Eigen::EigenSolver<Matrix> solver(h);
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("gram_spectrum: eigensolver failed");
    Vector vals(k);
    for (int i = 0; i < k; ++i) {
        const auto z = solver.eigenvalues()(i);
        if (std::fabs(z.imag()) > 1e-8 * std::max(1.0, std::fabs(z.real())))
            throw ConvergenceError("gram_spectrum: non-real eigenvalue");
        vals(i) = z.real();
    }
    return Spectrum(vals);
}

double secular_residual(const Spectrum& noise, const Vector& angles_sq,
                        double theta, double lambda_hat) {
    if (angles_sq.size() != noise.dim)
        throw DimensionError("secular_residual: angles/spectrum size mismatch");
    if (std::fabs(theta - 1.0) < 1e-14)
        throw DivisionByZeroError("secular_residual: theta == 1");
    double acc = 0.0;
    for (int i = 0; i < noise.dim; ++i) {
        const double lam = noise.eigenvalues(i);
        const double gap = lambda_hat - lam;
        if (std::fabs(gap) < 1e-12 * std::max(1.0, std::fabs(lambda_hat)))
            throw PoleViolationError("secular_residual: lambda_hat at a noise eigenvalue");
        acc += lam * angles_sq(i) / gap;
    }
    return acc - 1.0 / (theta - 1.0);
}

}  // namespace spiketest
