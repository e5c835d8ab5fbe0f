#include "coscpmm/kernels.hpp"

#include <string>
#include <vector>

#include "coscpmm/error.hpp"

namespace coscpmm {

namespace {

void check_alias(Eigen::Index m_samples, int nf) {
    if (nf < 0) throw Error(ErrorKind::aliasing, "harmonic count must be non-negative");
    if (m_samples < 4 * static_cast<Eigen::Index>(nf)) {
        throw Error(ErrorKind::aliasing, "grid of " + std::to_string(m_samples) +
                                             " samples cannot resolve " + std::to_string(nf) +
                                             " harmonics (need M >= 4 Nf)");
    }
}

}  // namespace

CMat truncated_dft(const CMat& samples, int nf, Exec exec) {
    const Eigen::Index rows = samples.rows();
    const Eigen::Index M = samples.cols();
    check_alias(M, nf);

    // Twiddle table indexed by (m j) mod M keeps every phase exact to one rounding.
    std::vector<cplx> twiddle(static_cast<std::size_t>(M));
    for (Eigen::Index j = 0; j < M; ++j) {
        twiddle[j] = std::polar(1.0, -kTwoPi * static_cast<double>(j) / static_cast<double>(M));
    }

    const int width = 2 * nf + 1;
    CMat out(rows, width);
    const double inv_m = 1.0 / static_cast<double>(M);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int col = 0; col < width; ++col) {
        const long long m = col - nf;
        const long long mm = ((m % M) + M) % M;
        for (Eigen::Index r = 0; r < rows; ++r) {
            cplx acc{0.0, 0.0};
            long long idx = 0;
            for (Eigen::Index j = 0; j < M; ++j) {
                acc += samples(r, j) * twiddle[static_cast<std::size_t>(idx)];
                idx += mm;
                if (idx >= M) idx -= M;
            }
            out(r, col) = acc * inv_m;
        }
    }
    return out;
}

namespace ref {

CMat truncated_dft(const CMat& samples, int nf) {
    const Eigen::Index rows = samples.rows();
    const Eigen::Index M = samples.cols();
    check_alias(M, nf);
    CMat out = CMat::Zero(rows, 2 * nf + 1);
    for (int m = -nf; m <= nf; ++m) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            cplx acc{0.0, 0.0};
            for (Eigen::Index j = 0; j < M; ++j) {
                const double phase = -kTwoPi * static_cast<double>(m) * static_cast<double>(j) /
                                     static_cast<double>(M);
                acc += samples(r, j) * std::polar(1.0, phase);
            }
            out(r, nf + m) = acc / static_cast<double>(M);
        }
    }
    return out;
}

}  // namespace ref

}  // namespace coscpmm
