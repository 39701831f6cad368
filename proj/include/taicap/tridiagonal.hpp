#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "taicap/errors.hpp"

namespace taicap {

/// Tridiagonal system in band storage. Row i reads
/// sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]; sub[0] and sup[n-1] are ignored.
struct TridiagonalSystem {
    std::vector<double> sub, diag, sup, rhs;

    explicit TridiagonalSystem(std::size_t n = 0) : sub(n, 0.0), diag(n, 0.0), sup(n, 0.0), rhs(n, 0.0) {}
    std::size_t size() const noexcept { return diag.size(); }
};

/// Gaussian elimination with partial pivoting (the LAPACK gtsv scheme, one
/// fill-in superdiagonal). Throws DomainError on an exactly singular pivot.
inline std::vector<double> solve_tridiagonal(TridiagonalSystem sys) {
    const std::size_t n = sys.size();
    std::vector<double> dl(n, 0.0), d = std::move(sys.diag), du(n, 0.0), du2(n, 0.0), b = std::move(sys.rhs);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        dl[i] = sys.sub[i + 1];
        du[i] = sys.sup[i];
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (std::abs(d[i]) >= std::abs(dl[i])) {
            if (d[i] == 0.0) throw DomainError("solve_tridiagonal: singular matrix");
            const double f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        } else {
            const double f = d[i] / dl[i];
            d[i] = dl[i];
            const double tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if (i + 2 < n) {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            du[i] = tmp;
            std::swap(b[i], b[i + 1]);
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        }
    }
    if (n > 0 && d[n - 1] == 0.0) throw DomainError("solve_tridiagonal: singular matrix");
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double v = b[i];
        if (i + 1 < n) v -= du[i] * x[i + 1];
        if (i + 2 < n) v -= du2[i] * x[i + 2];
        x[i] = v / d[i];
    }
    return x;
}

}  // namespace taicap
