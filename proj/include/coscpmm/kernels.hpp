#pragma once

#include "coscpmm/types.hpp"

namespace coscpmm {

/// Truncated DFT of periodic sample rows.
///
/// `samples` is components x M (the first M samples of a period; a trailing
/// endpoint column, if present, must be dropped by the caller). Returns
/// components x (2 nf + 1) with column nf + m holding
///     (1/M) sum_j samples(:, j) exp(-i 2 pi m j / M).
/// Throws an aliasing error unless M >= 4 nf.
[[nodiscard]] CMat truncated_dft(const CMat& samples, int nf, Exec exec = Exec::parallel);

namespace ref {

/// Serial reference for truncated_dft: direct double loop with std::polar per term.
[[nodiscard]] CMat truncated_dft(const CMat& samples, int nf);

}  // namespace ref

}  // namespace coscpmm
