#include "mlphash/randortho.hpp"

namespace mlphash {

Matrix random_normal_matrix(UserKey key, std::uint64_t stream_id, Index rows, Index cols) {
    if (rows < 1 || cols < 1) throw InvalidParameter("matrix dimensions must be >= 1");
    SeededStream stream(key, stream_id);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = stream.normal();
    return m;
}

namespace detail {

Matrix gram_schmidt_core(const Matrix& m, double tol, const RedrawFn& redraw, Index max_redraws) {
    if (!all_finite(m)) throw NonFiniteInput("gram_schmidt_rows: non-finite entry");
    if (tol <= 0.0) throw InvalidParameter("gram_schmidt_rows: tol must be > 0");

    const Index rows = m.rows(), cols = m.cols();
    Matrix q(rows, cols);
    Eigen::RowVectorXd r(cols);
    Index block_start = 0;  // first row of the block being orthonormalized
    Index redraws = 0;

    for (Index i = 0; i < rows; ++i) {
        r = m.row(i);
        bool restarted = false;
        for (;;) {
            // modified Gram-Schmidt: subtract projections one basis row at a time
            for (Index j = block_start; j < i; ++j) r -= (r.dot(q.row(j))) * q.row(j);
            const double norm = r.norm();
            if (norm >= tol) {
                q.row(i) = r / norm;
                break;
            }
            if (redraw && redraws < max_redraws && redraw(i, r)) {
                ++redraws;
                if (!r.allFinite()) throw NonFiniteInput("gram_schmidt_rows: non-finite redraw");
                continue;
            }
            if (redraw)
                throw DegenerateDraw("gen_orthonormal_layer: redraw budget exhausted at row " +
                                     std::to_string(i));
            if (!restarted && block_start < i) {
                // dependent row: restart the block here and retry against an empty basis
                block_start = i;
                r = m.row(i);
                restarted = true;
                continue;
            }
            throw DegenerateDraw("gram_schmidt_rows: row " + std::to_string(i) +
                                 " has norm below tol");
        }
        if (i + 1 - block_start == cols) block_start = i + 1;  // block filled
    }
    return q;
}

}  // namespace detail

Matrix gram_schmidt_rows(const Matrix& m, double tol) {
    return detail::gram_schmidt_core(m, tol, nullptr, 0);
}

Matrix gen_orthonormal_layer(UserKey key, std::uint64_t layer_index, Index rows, Index cols,
                             double tol) {
    if (rows < 1 || cols < 1) throw InvalidParameter("layer dimensions must be >= 1");
    SeededStream stream(key, layer_index);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = stream.normal();
    // redraws continue consuming the same stream, after the initial draw
    auto redraw = [&stream](Index, Eigen::Ref<Eigen::RowVectorXd> out) {
        for (Index j = 0; j < out.size(); ++j) out[j] = stream.normal();
        return true;
    };
    return detail::gram_schmidt_core(m, tol, redraw, rows);
}

}  // namespace mlphash
