#include "gfmate/gcn.hpp"

#include "gfmate/text_io.hpp"

#include <cmath>
#include <string>

namespace gfmate {

Matrix CsrMatrix::to_dense() const {
    Matrix dense = Matrix::Zero(rows, rows);
    for (Index i = 0; i < rows; ++i) {
        for (Index k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
            dense(i, col_indices[k]) = values[k];
        }
    }
    return dense;
}

Matrix spmm(const CsrMatrix& a, const Matrix& x) {
    if (x.rows() != a.rows) throw DataError("spmm: row count mismatch");
    Matrix y = Matrix::Zero(a.rows, x.cols());
    for (Index i = 0; i < a.rows; ++i) {
        auto yi = y.row(i);
        for (Index k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            yi.noalias() += a.values[k] * x.row(a.col_indices[k]);
        }
    }
    return y;
}

CsrMatrix normalize_adjacency(const Graph& g) {
    const Index n = g.num_nodes;
    std::vector<double> inv_sqrt(static_cast<std::size_t>(n));
    for (NodeId u = 0; u < n; ++u) {
        inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u) + 1));
    }
    CsrMatrix a;
    a.rows = n;
    a.row_offsets.assign(static_cast<std::size_t>(n) + 1, 0);
    a.col_indices.reserve(g.col_indices.size() + static_cast<std::size_t>(n));
    a.values.reserve(a.col_indices.capacity());
    for (NodeId u = 0; u < n; ++u) {
        bool diagonal_done = false;
        auto put = [&](NodeId v) {
            a.col_indices.push_back(v);
            a.values.push_back(inv_sqrt[u] * inv_sqrt[v]);
        };
        for (NodeId v : g.neighbors(u)) {
            if (!diagonal_done && v > u) {
                put(u);
                diagonal_done = true;
            }
            put(v);
        }
        if (!diagonal_done) put(u);
        a.row_offsets[u + 1] = static_cast<Index>(a.col_indices.size());
    }
    return a;
}

std::vector<Index> GcnParams::dims() const {
    std::vector<Index> d;
    if (weights.empty()) return d;
    d.push_back(weights.front().rows());
    for (const auto& w : weights) d.push_back(w.cols());
    return d;
}

void GcnParams::validate() const {
    if (weights.size() != biases.size()) throw DataError("gcn params: weight/bias count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (l > 0 && weights[l].rows() != weights[l - 1].cols()) {
            throw DataError("gcn params: layer " + std::to_string(l + 1) +
                            " input dim does not match previous output");
        }
        if (biases[l].size() != weights[l].cols()) {
            throw DataError("gcn params: bias " + std::to_string(l + 1) + " has wrong length");
        }
        if (!weights[l].allFinite() || !biases[l].allFinite()) {
            throw DataError("gcn params: non-finite entries in layer " + std::to_string(l + 1));
        }
    }
    if (!std::isfinite(activation_slope)) throw DataError("gcn params: non-finite slope");
}

GcnParams GcnParams::zeros(const std::vector<Index>& dims, double slope) {
    GcnParams p;
    p.activation_slope = slope;
    for (std::size_t l = 1; l < dims.size(); ++l) {
        p.weights.push_back(Matrix::Zero(dims[l - 1], dims[l]));
        p.biases.push_back(RowVector::Zero(dims[l]));
    }
    return p;
}

bool operator==(const GcnParams& a, const GcnParams& b) {
    if (a.dims() != b.dims() || a.activation_slope != b.activation_slope) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
    }
    return true;
}

double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

LayerEmbeddings encode(const CsrMatrix& adjacency, const Matrix& input, const GcnParams& params) {
    if (params.num_layers() > 0 && input.cols() != params.input_dim()) {
        throw DataError("encode: input dimension " + std::to_string(input.cols()) +
                        " does not match model input dimension " +
                        std::to_string(params.input_dim()));
    }
    if (input.rows() != adjacency.rows) throw DataError("encode: feature rows != node count");
    LayerEmbeddings out;
    out.layers.reserve(static_cast<std::size_t>(params.num_layers()) + 1);
    out.layers.push_back(input);
    for (Index l = 0; l < params.num_layers(); ++l) {
        Matrix z = spmm(adjacency, out.layers.back()) * params.weights[l];
        z.rowwise() += params.biases[l];
        const double slope = params.activation_slope;
        z = z.unaryExpr([slope](double v) { return leaky_relu(v, slope); });
        if (!z.allFinite()) {
            throw NumericalError("encode: non-finite values at layer " + std::to_string(l + 1));
        }
        out.layers.push_back(std::move(z));
    }
    return out;
}

LayerEmbeddings encode(const Graph& g, const AlignedFeatures& aligned, const GcnParams& params) {
    return encode(normalize_adjacency(g), aligned.matrix, params);
}

void save_params(const GcnParams& params, const std::filesystem::path& file) {
    params.validate();
    std::string out = "layers=" + std::to_string(params.num_layers()) + "\ndims=";
    const auto dims = params.dims();
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(dims[i]);
    }
    out += "\nslope=" + text::format_double(params.activation_slope) + "\n";
    for (Index l = 0; l < params.num_layers(); ++l) {
        out += "W" + std::to_string(l + 1) + "\n";
        const Matrix& w = params.weights[l];
        for (Index r = 0; r < w.rows(); ++r) out += text::format_row(w.row(r).data(), w.cols()) + "\n";
        out += "b" + std::to_string(l + 1) + "\n";
        out += text::format_row(params.biases[l].data(), params.biases[l].size()) + "\n";
    }
    text::write_file(file, out);
}

GcnParams load_params(const std::filesystem::path& file) {
    const auto lines = text::read_lines(file);
    std::size_t pos = 0;
    const std::string name = file.filename().string();
    auto next_line = [&]() -> std::string_view {
        while (pos < lines.size() && text::trim(lines[pos]).empty()) ++pos;
        if (pos >= lines.size()) throw DataError(name + ": unexpected end of file");
        return text::trim(lines[pos++]);
    };
    auto header = [&](std::string_view key) -> std::string_view {
        auto line = next_line();
        if (line.substr(0, key.size()) != key || line.size() <= key.size() ||
            line[key.size()] != '=') {
            throw DataError(name + ":" + std::to_string(pos) + ": expected " + std::string(key) + "=");
        }
        return line.substr(key.size() + 1);
    };
    const auto num_layers = text::parse_int(header("layers"), name + " layers");
    std::vector<Index> dims;
    for (auto f : text::split_char(header("dims"), ',')) dims.push_back(text::parse_int(f, name + " dims"));
    if (num_layers < 0 || static_cast<long long>(dims.size()) != num_layers + 1) {
        throw DataError(name + ": dims must list layers+1 entries");
    }
    for (Index d : dims) {
        if (d < 1) throw DataError(name + ": dimensions must be positive");
    }
    GcnParams p = GcnParams::zeros(dims, text::parse_double(header("slope"), name + " slope"));
    auto read_row = [&](double* dst, Index n) {
        auto fields = text::split_ws(next_line());
        const std::string ctx = name + ":" + std::to_string(pos);
        if (static_cast<Index>(fields.size()) != n) {
            throw DataError(ctx + ": expected " + std::to_string(n) + " values");
        }
        for (Index j = 0; j < n; ++j) dst[j] = text::parse_double(fields[j], ctx);
    };
    for (Index l = 0; l < num_layers; ++l) {
        const std::string tag = std::to_string(l + 1);
        if (next_line() != "W" + tag) throw DataError(name + ":" + std::to_string(pos) + ": expected W" + tag);
        for (Index r = 0; r < p.weights[l].rows(); ++r) read_row(p.weights[l].row(r).data(), p.weights[l].cols());
        if (next_line() != "b" + tag) throw DataError(name + ":" + std::to_string(pos) + ": expected b" + tag);
        read_row(p.biases[l].data(), p.biases[l].size());
    }
    p.validate();
    return p;
}

}  // namespace gfmate
