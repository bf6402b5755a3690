#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trajkit/error.hpp"

namespace trajkit {

/// Knot layout of a natural cubic spline basis. The basis is parameterized
/// by the curve's values at the knots, so n_basis equals the knot count.
/// Between knots the curve is cubic with continuous second derivative; beyond
/// the boundary knots it continues linearly.
struct SplineBasisSpec {
    std::vector<double> knots; // strictly increasing
    double t_lo = 0.0;         // domain bounds seen at construction
    double t_hi = 0.0;
    int n_basis = 0;           // == knots.size()
};

/// A fitted penalized spline: the cluster-center representation.
/// `coefficients` are the curve values at the knots; `curvature` holds the
/// second derivatives at the knots (zero at both ends) and makes single-point
/// evaluation O(log n_basis).
struct SplineModel {
    SplineBasisSpec spec;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd curvature;
    double lambda = 0.0;
    double edf = 0.0;
    double rss = 0.0;
    long long n_obs = 0;

    /// AIC-style score n*log(rss/n) + 2*edf for across-fit comparison.
    double aic() const {
        const double msr = std::max(rss / static_cast<double>(n_obs), 1e-300);
        return static_cast<double>(n_obs) * std::log(msr) + 2.0 * edf;
    }

    /// Evaluates the curve at one time point.
    double value(double x) const {
        const auto& k = spec.knots;
        const int m = spec.n_basis;
        if (x <= k.front()) {
            const double h = k[1] - k[0];
            const double slope = (coefficients[1] - coefficients[0]) / h - curvature[1] * h / 6.0;
            return coefficients[0] + (x - k.front()) * slope;
        }
        if (x >= k.back()) {
            const double h = k[m - 1] - k[m - 2];
            const double slope =
                (coefficients[m - 1] - coefficients[m - 2]) / h + curvature[m - 2] * h / 6.0;
            return coefficients[m - 1] + (x - k.back()) * slope;
        }
        const int i = static_cast<int>(std::upper_bound(k.begin(), k.end(), x) - k.begin()) - 1;
        const double h = k[i + 1] - k[i];
        const double t = x - k[i];
        const double d = k[i + 1] - x;
        return curvature[i] * d * d * d / (6.0 * h) + curvature[i + 1] * t * t * t / (6.0 * h) +
               (coefficients[i] / h - curvature[i] * h / 6.0) * d +
               (coefficients[i + 1] / h - curvature[i + 1] * h / 6.0) * t;
    }
};

/// Natural cubic spline basis engine. Precomputes the map from knot values to
/// inner-knot curvatures (gamma = G * g) and the exact integrated squared
/// second derivative penalty S = Q R^-1 Q^T (Green & Silverman banded
/// matrices), so that design rows and the penalty share one construction.
class NaturalSplineBasis {
public:
    explicit NaturalSplineBasis(SplineBasisSpec spec) : spec_(std::move(spec)) {
        const int m = static_cast<int>(spec_.knots.size());
        if (m < 3) throw InsufficientSupportError("spline basis needs at least 3 knots");
        if (spec_.n_basis != m) throw Error("basis spec: n_basis must equal knot count");
        for (int i = 0; i + 1 < m; ++i)
            if (!(spec_.knots[i] < spec_.knots[i + 1]))
                throw Error("basis spec: knots must be strictly increasing");

        h_.resize(m - 1);
        for (int i = 0; i + 1 < m; ++i) h_[i] = spec_.knots[i + 1] - spec_.knots[i];

        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m - 2);
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m - 2, m - 2);
        for (int p = 0; p < m - 2; ++p) {
            q(p, p) = 1.0 / h_[p];
            q(p + 1, p) = -1.0 / h_[p] - 1.0 / h_[p + 1];
            q(p + 2, p) = 1.0 / h_[p + 1];
            r(p, p) = (h_[p] + h_[p + 1]) / 3.0;
            if (p + 1 < m - 2) {
                r(p, p + 1) = h_[p + 1] / 6.0;
                r(p + 1, p) = h_[p + 1] / 6.0;
            }
        }
        G_ = r.ldlt().solve(q.transpose()); // (m-2) x m
        S_ = q * G_;
        S_ = ((S_ + S_.transpose()) / 2.0).eval();

        // Orthogonal reparameterization T = [U1 L1^-1/2 | U0] from S = U L U',
        // with the two null directions (affine curves) last. In these
        // coordinates the penalty is exactly diag(1,...,1,0,0), so the
        // penalized solve adds lambda only to leading diagonal entries and
        // stays accurate even when lambda*S would swamp X'X.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S_);
        const Eigen::VectorXd ev = es.eigenvalues(); // ascending
        T_.resize(m, m);
        for (int j = 2; j < m; ++j)
            T_.col(j - 2) = es.eigenvectors().col(j) / std::sqrt(std::max(ev[j], 1e-300));
        T_.col(m - 2) = es.eigenvectors().col(0);
        T_.col(m - 1) = es.eigenvectors().col(1);
    }

    int size() const { return spec_.n_basis; }
    const SplineBasisSpec& spec() const { return spec_; }
    const Eigen::MatrixXd& penalty() const { return S_; }
    const Eigen::MatrixXd& reparam() const { return T_; }

    using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

    /// Writes the design row at `x`: the weights such that f(x) = row . g.
    void design_row(double x, RowRef row) const {
        const auto& k = spec_.knots;
        const int m = spec_.n_basis;
        row.setZero();
        if (x < k.front()) {
            const double u = (x - k.front()) / h_[0];
            row[0] = 1.0 - u;
            row[1] = u;
            row += (-(x - k.front()) * h_[0] / 6.0) * G_.row(0);
            return;
        }
        if (x > k.back()) {
            const double e = x - k.back();
            const double h = h_[m - 2];
            row[m - 1] = 1.0 + e / h;
            row[m - 2] = -e / h;
            row += (e * h / 6.0) * G_.row(m - 3);
            return;
        }
        int i = static_cast<int>(std::upper_bound(k.begin(), k.end(), x) - k.begin()) - 1;
        i = std::clamp(i, 0, m - 2);
        const double h = h_[i];
        const double t = x - k[i];
        const double d = k[i + 1] - x;
        row[i] = d / h;
        row[i + 1] = t / h;
        if (i > 0) row += (d * d * d / (6.0 * h) - h * d / 6.0) * G_.row(i - 1);
        if (i + 1 < m - 1) row += (t * t * t / (6.0 * h) - h * t / 6.0) * G_.row(i);
    }

    Eigen::MatrixXd design(const std::vector<double>& times) const {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(times.size()), spec_.n_basis);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            design_row(times[static_cast<std::size_t>(i)], x.row(i));
        return x;
    }

    /// Second derivatives at all knots for the curve with knot values g.
    Eigen::VectorXd full_curvature(const Eigen::VectorXd& g) const {
        Eigen::VectorXd gamma = Eigen::VectorXd::Zero(spec_.n_basis);
        gamma.segment(1, spec_.n_basis - 2) = G_ * g;
        return gamma;
    }

private:
    SplineBasisSpec spec_;
    std::vector<double> h_;
    Eigen::MatrixXd G_;
    Eigen::MatrixXd S_;
    Eigen::MatrixXd T_;
};

/// Builds a basis spec from observed times: knots sit at evenly spaced
/// quantile indices of the distinct times, n_basis = min(maxdf, distinct-1)
/// floored at 3. Fewer than 4 distinct times cannot support smoothing
/// selection and raise InsufficientSupportError (a cluster-drop trigger).
inline SplineBasisSpec make_basis_spec(const std::vector<double>& times, int maxdf) {
    std::vector<double> distinct(times);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const long long d = static_cast<long long>(distinct.size());
    if (d < 4)
        throw InsufficientSupportError("need at least 4 distinct time points, got " + std::to_string(d));

    const int m = std::max(3, static_cast<int>(std::min<long long>(maxdf, d - 1)));
    SplineBasisSpec spec;
    spec.knots.resize(m);
    for (int j = 0; j < m; ++j) {
        const double pos = static_cast<double>(j) * static_cast<double>(d - 1) / (m - 1);
        spec.knots[j] = distinct[static_cast<std::size_t>(std::llround(pos))];
    }
    spec.t_lo = distinct.front();
    spec.t_hi = distinct.back();
    spec.n_basis = m;
    return spec;
}

/// len(times) x n_basis matrix whose row i evaluates the basis at times[i].
inline Eigen::MatrixXd design_matrix(const SplineBasisSpec& spec, const std::vector<double>& times) {
    return NaturalSplineBasis(spec).design(times);
}

/// Symmetric PSD penalty matrix: beta' S beta equals the integrated squared
/// second derivative of the curve with knot values beta. Null space is the
/// affine functions (rank n_basis - 2).
inline Eigen::MatrixXd penalty_matrix(const SplineBasisSpec& spec) {
    return NaturalSplineBasis(spec).penalty();
}

namespace detail {

/// Cross-products of the penalized least-squares problem, accumulated
/// blockwise so fits over millions of rows never materialize the full design
/// matrix. One instance serves every lambda during smoothing selection.
class PenalizedNormalEq {
public:
    PenalizedNormalEq(const SplineBasisSpec& spec, const std::vector<double>& times,
                      const std::vector<double>& responses)
        : basis_(spec), n_(static_cast<long long>(times.size())) {
        if (times.size() != responses.size())
            throw Error("fit: times and responses must have equal length");
        if (times.empty()) throw Error("fit: need at least one observation");
        const int m = basis_.size();
        xtx_ = Eigen::MatrixXd::Zero(m, m);
        xty_ = Eigen::VectorXd::Zero(m);
        yty_ = 0.0;

        constexpr std::size_t block = 4096;
        Eigen::MatrixXd xb(static_cast<Eigen::Index>(std::min(block, times.size())), m);
        Eigen::VectorXd yb(xb.rows());
        for (std::size_t start = 0; start < times.size(); start += block) {
            const std::size_t rows = std::min(block, times.size() - start);
            for (std::size_t i = 0; i < rows; ++i) {
                basis_.design_row(times[start + i], xb.row(static_cast<Eigen::Index>(i)));
                yb[static_cast<Eigen::Index>(i)] = responses[start + i];
            }
            auto xv = xb.topRows(static_cast<Eigen::Index>(rows));
            auto yv = yb.head(static_cast<Eigen::Index>(rows));
            xtx_.noalias() += xv.transpose() * xv;
            xty_.noalias() += xv.transpose() * yv;
            yty_ += yv.squaredNorm();
        }

        const Eigen::MatrixXd& t_mat = basis_.reparam();
        txxt_ = t_mat.transpose() * xtx_ * t_mat;
        txxt_ = ((txxt_ + txxt_.transpose()) / 2.0).eval();
        txy_ = t_mat.transpose() * xty_;
    }

    struct Solution {
        Eigen::VectorXd beta;
        double edf = 0.0;
        double rss_quad = 0.0; // from the quadratic form; clamped at 0
    };

    /// Solves (X'X + lambda S) beta = X'y by Cholesky in the reparameterized
    /// coordinates, where the penalty is the identity on the leading
    /// n_basis-2 entries and zero on the affine pair. A ridge of
    /// 1e-10 * mean(diag) is added only if the factorization reports a
    /// numerical problem; a second failure raises FitFailureError.
    Solution solve(double lambda) const {
        const int m = basis_.size();
        Eigen::MatrixXd h = txxt_;
        h.diagonal().head(m - 2).array() += lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        if (llt.info() != Eigen::Success) {
            const double ridge = 1e-10 * h.diagonal().mean();
            h.diagonal().array() += ridge;
            llt.compute(h);
            if (llt.info() != Eigen::Success)
                throw FitFailureError("penalized normal equations are singular");
        }
        Solution sol;
        const Eigen::VectorXd alpha = llt.solve(txy_);
        sol.beta = basis_.reparam() * alpha;
        sol.edf = std::clamp(llt.solve(txxt_).trace(), 0.0, static_cast<double>(m));
        const double quad = yty_ - 2.0 * alpha.dot(txy_) + alpha.dot(txxt_ * alpha);
        sol.rss_quad = std::max(quad, 0.0);
        return sol;
    }

    const NaturalSplineBasis& basis() const { return basis_; }
    long long n() const { return n_; }

private:
    NaturalSplineBasis basis_;
    Eigen::MatrixXd xtx_;
    Eigen::VectorXd xty_;
    Eigen::MatrixXd txxt_; // T' X'X T
    Eigen::VectorXd txy_;  // T' X'y
    double yty_ = 0.0;
    long long n_ = 0;
};

inline SplineModel finish_model(const PenalizedNormalEq& eq, const PenalizedNormalEq::Solution& sol,
                                double lambda, const std::vector<double>& times,
                                const std::vector<double>& responses) {
    SplineModel model;
    model.spec = eq.basis().spec();
    model.coefficients = sol.beta;
    model.curvature = eq.basis().full_curvature(sol.beta);
    model.lambda = lambda;
    model.edf = sol.edf;
    model.n_obs = eq.n();
    // exact residual pass; the quadratic form cancels badly near interpolation
    double rss = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double r = responses[i] - model.value(times[i]);
        rss += r * r;
    }
    model.rss = rss;
    return model;
}

} // namespace detail

/// Penalized least-squares fit at a fixed smoothing parameter, minimizing
/// sum (y - f(t))^2 + lambda * integral f''^2 over natural cubic splines on
/// the spec's knots. edf is the trace of the influence matrix.
inline SplineModel fit_penalized(const std::vector<double>& times, const std::vector<double>& responses,
                                 const SplineBasisSpec& spec, double lambda) {
    if (lambda < 0.0) throw Error("fit: lambda must be nonnegative");
    detail::PenalizedNormalEq eq(spec, times, responses);
    const auto sol = eq.solve(lambda);
    return detail::finish_model(eq, sol, lambda, times, responses);
}

/// GCV score for a fitted model: n * rss / (n - edf)^2.
inline double gcv_score(const SplineModel& model) {
    const double n = static_cast<double>(model.n_obs);
    const double denom = n - model.edf;
    return n * model.rss / (denom * denom);
}

/// Selects the smoothing parameter by minimizing GCV(lambda) =
/// n*RSS/(n - edf)^2: a 15-point grid scan over log10 lambda in [-6, 8]
/// followed by golden-section refinement around the best grid point. Returns
/// the minimizing lambda and the model refit at it.
inline std::pair<double, SplineModel> select_lambda(const std::vector<double>& times,
                                                    const std::vector<double>& responses,
                                                    const SplineBasisSpec& spec) {
    if (times.size() < 4) throw FitFailureError("smoothing selection needs at least 4 observations");
    detail::PenalizedNormalEq eq(spec, times, responses);
    const double n = static_cast<double>(eq.n());

    const auto gcv_at = [&](double log10_lambda) -> double {
        try {
            const auto sol = eq.solve(std::pow(10.0, log10_lambda));
            if (n - sol.edf <= 0.0) return std::numeric_limits<double>::infinity();
            const double denom = n - sol.edf;
            return n * sol.rss_quad / (denom * denom);
        } catch (const FitFailureError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    constexpr double kLo = -6.0, kHi = 8.0;
    double best_x = 0.0, best_g = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 15; ++i) {
        const double x = kLo + i; // unit steps span [-6, 8]
        const double g = gcv_at(x);
        if (g < best_g) {
            best_g = g;
            best_x = x;
        }
    }
    if (!std::isfinite(best_g))
        throw FitFailureError("no usable smoothing parameter: effective df reaches n at every grid point");

    double a = std::max(kLo, best_x - 1.0);
    double b = std::min(kHi, best_x + 1.0);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double g1 = gcv_at(x1), g2 = gcv_at(x2);
    while (b - a > 1e-3) {
        if (g1 <= g2) {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - gr * (b - a);
            g1 = gcv_at(x1);
        } else {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + gr * (b - a);
            g2 = gcv_at(x2);
        }
        const double xm = g1 <= g2 ? x1 : x2;
        const double gm = std::min(g1, g2);
        if (gm < best_g) {
            best_g = gm;
            best_x = xm;
        }
    }

    const double lambda = std::pow(10.0, best_x);
    const auto sol = eq.solve(lambda);
    return {lambda, detail::finish_model(eq, sol, lambda, times, responses)};
}

/// Evaluates a fitted spline at the given times (linear beyond the boundary
/// knots); empty input yields an empty vector.
inline std::vector<double> predict(const SplineModel& model, const std::vector<double>& times) {
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out[i] = model.value(times[i]);
    return out;
}

} // namespace trajkit
