#pragma once

#include "mlphash/common.hpp"
#include "mlphash/prng.hpp"

#include <functional>
#include <vector>

namespace mlphash {

constexpr double kGramSchmidtTol = 1e-10;

/// rows x cols matrix of standard normals drawn from SeededStream(key, stream_id),
/// filled row by row.
Matrix random_normal_matrix(UserKey key, std::uint64_t stream_id, Index rows, Index cols);

/// Row-wise modified Gram-Schmidt with a block restart: the basis is cleared
/// after every `cols` accepted rows, so each contiguous block of `cols` rows
/// is an orthonormal set and every row of the result is unit norm. A row whose
/// residual norm drops below `tol` also restarts the block at that row (it is
/// linearly dependent on the block so far and cannot extend the basis).
/// Throws NonFiniteInput on non-finite entries and DegenerateDraw when a row
/// cannot be normalized at all (norm below tol).
Matrix gram_schmidt_rows(const Matrix& m, double tol = kGramSchmidtTol);

/// Orthonormal layer of Algorithm "random matrix then Gram-Schmidt":
/// draws rows x cols normals from stream `layer_index` of `key`, then runs the
/// block Gram-Schmidt above. A degenerate residual redraws that single row
/// from the same stream (at most `rows` redraws in total, then DegenerateDraw);
/// redraws keep the result a pure function of (key, layer_index, rows, cols).
Matrix gen_orthonormal_layer(UserKey key, std::uint64_t layer_index, Index rows, Index cols,
                             double tol = kGramSchmidtTol);

/// Per-user sequence of orthonormal weight matrices, one per MLP layer.
using OrthonormalStack = std::vector<Matrix>;

namespace detail {

/// Row supplier invoked when row `i` is degenerate; writes a replacement row.
/// Returns false to fall back to the block-restart rule instead of replacing.
using RedrawFn = std::function<bool(Index row, Eigen::Ref<Eigen::RowVectorXd> out)>;

/// Shared Gram-Schmidt core. With a null `redraw`, degenerate rows restart the
/// block (public gram_schmidt_rows behavior); with one, they are replaced and
/// retried up to `max_redraws` times in total.
Matrix gram_schmidt_core(const Matrix& m, double tol, const RedrawFn& redraw, Index max_redraws);

}  // namespace detail

}  // namespace mlphash
