#include "gfmate/align.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace gfmate {

namespace {

// Largest-magnitude entry positive; first index wins ties.
bool needs_flip(const Eigen::Ref<const Vector>& v) {
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i) {
        if (std::abs(v(i)) > std::abs(v(best))) best = i;
    }
    return v.size() > 0 && v(best) < 0.0;
}

}  // namespace

AlignedFeatures svd_align(const Matrix& features, Index target_dim) {
    if (target_dim < 1) throw DataError("svd_align: target dimension must be >= 1");
    if (features.rows() == 0 || features.cols() == 0) throw DataError("svd_align: empty matrix");
    if (!features.allFinite()) throw DataError("svd_align: non-finite feature entries");

    const Index n = features.rows();
    const Index d = features.cols();
    const bool feature_side = d <= n;

    Eigen::MatrixXd gram = feature_side ? Eigen::MatrixXd(features.transpose() * features)
                                        : Eigen::MatrixXd(features * features.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("svd_align: eigensolver failed");

    const Index m = gram.rows();
    const Vector& evals = eig.eigenvalues();  // ascending
    const double lambda_max = std::max(evals(m - 1), 0.0);
    const double cutoff = lambda_max * static_cast<double>(std::max(n, d)) *
                          std::numeric_limits<double>::epsilon() * 10.0;

    AlignedFeatures out;
    out.target_dim = target_dim;
    out.matrix = Matrix::Zero(n, target_dim);
    out.basis = Matrix::Zero(d, target_dim);
    out.singular_values = Vector::Zero(target_dim);

    const Index usable = std::min(target_dim, m);
    for (Index k = 0; k < usable; ++k) {
        const Index src = m - 1 - k;
        const double lambda = evals(src);
        if (!(lambda > cutoff)) break;
        const double sigma = std::sqrt(lambda);
        out.singular_values(k) = sigma;
        if (feature_side) {
            Vector v = eig.eigenvectors().col(src);
            if (needs_flip(v)) v = -v;
            out.basis.col(k) = v;
            out.matrix.col(k) = features * v;
        } else {
            Vector u = eig.eigenvectors().col(src);
            Vector v = features.transpose() * u / sigma;
            if (needs_flip(v)) {
                u = -u;
                v = -v;
            }
            out.basis.col(k) = v;
            out.matrix.col(k) = u * sigma;
        }
    }
    return out;
}

AlignedFeatures as_aligned(Matrix features) {
    AlignedFeatures out;
    out.target_dim = features.cols();
    out.matrix = std::move(features);
    return out;
}

}  // namespace gfmate
