#pragma once

#include "gfmate/common.hpp"

namespace gfmate {

struct AlignedFeatures {
    Matrix matrix;       // N x target_dim
    Index target_dim = 0;
    /// Right-singular basis actually used (d_in x target_dim; zero columns
    /// past the numerical rank).
    Matrix basis;
    Vector singular_values;  // length target_dim, descending, zero-padded
};

/// Projects `features` onto its leading `target_dim` right-singular vectors,
/// i.e. returns X V_k = U_k S_k. Columns beyond the numerical rank are zero.
/// Each right-singular vector is sign-fixed so that its largest-magnitude
/// entry is positive.
///
/// The decomposition is taken on the smaller Gram matrix (X^T X when
/// d_in <= N, X X^T otherwise).
AlignedFeatures svd_align(const Matrix& features, Index target_dim);

/// Wraps already-aligned features (e.g. loaded from disk) without
/// recomputing the decomposition.
AlignedFeatures as_aligned(Matrix features);

}  // namespace gfmate
