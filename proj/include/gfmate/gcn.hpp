#pragma once

#include "gfmate/align.hpp"
#include "gfmate/common.hpp"
#include "gfmate/graph.hpp"

#include <filesystem>
#include <vector>

namespace gfmate {

/// Square sparse matrix in CSR form.
struct CsrMatrix {
    Index rows = 0;
    std::vector<Index> row_offsets{0};
    std::vector<NodeId> col_indices;
    std::vector<double> values;

    Matrix to_dense() const;
};

/// Y = A * X. Rows are independent; each row sums its terms in column order.
Matrix spmm(const CsrMatrix& a, const Matrix& x);

/// D^-1/2 (A + I) D^-1/2 with D the degree of A + I. An isolated node keeps a
/// single diagonal entry of 1.
CsrMatrix normalize_adjacency(const Graph& g);

/// Frozen GCN weights. Layer l maps d_{l-1} -> d_l through
/// H^l = leaky(Ahat H^{l-1} W^l + b^l).
struct GcnParams {
    std::vector<Matrix> weights;
    std::vector<RowVector> biases;
    double activation_slope = 0.25;

    Index num_layers() const { return static_cast<Index>(weights.size()); }
    Index input_dim() const { return weights.empty() ? 0 : weights.front().rows(); }
    std::vector<Index> dims() const;

    /// Throws DataError when shapes do not chain or entries are non-finite.
    void validate() const;

    /// Zero weights and biases with the given dimension chain.
    static GcnParams zeros(const std::vector<Index>& dims, double slope = 0.25);
};

bool operator==(const GcnParams& a, const GcnParams& b);

/// H^(0) .. H^(L); H^(0) is the aligned input.
struct LayerEmbeddings {
    std::vector<Matrix> layers;

    Index depth() const { return static_cast<Index>(layers.size()) - 1; }
    Index num_rows() const { return layers.empty() ? 0 : layers.front().rows(); }
};

double leaky_relu(double x, double slope);

LayerEmbeddings encode(const CsrMatrix& adjacency, const Matrix& input, const GcnParams& params);
LayerEmbeddings encode(const Graph& g, const AlignedFeatures& aligned, const GcnParams& params);

void save_params(const GcnParams& params, const std::filesystem::path& file);
GcnParams load_params(const std::filesystem::path& file);

}  // namespace gfmate
