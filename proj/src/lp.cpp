#include "bandlab/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace bandlab {

CoveringSolution solve_covering_lp(const Mat& M, const Vec& c, int max_pivots) {
    const Index n = M.rows();
    if (M.cols() != n || c.size() != n) throw ArgumentError("covering LP: shape mismatch");
    if (M.minCoeff() < 0.0 || c.minCoeff() < 0.0)
        throw ArgumentError("covering LP: data must be nonnegative");
    CoveringSolution sol;
    sol.a = Vec::Zero(n);
    if (n == 0 || c.maxCoeff() == 0.0) return sol;

    const double scale = c.maxCoeff();
    // Dual constraint row i reads sum_q M(i,q) y_q <= 1; variable y_q pairs with c_q.
    // Tableau columns: [y_0..y_{n-1} | s_0..s_{n-1} | rhs], last row = reduced costs.
    const Index cols = 2 * n + 1;
    Mat T = Mat::Zero(n + 1, cols);
    T.topLeftCorner(n, n) = M;
    for (Index i = 0; i < n; ++i) {
        T(i, n + i) = 1.0;
        T(i, 2 * n) = 1.0;
    }
    for (Index q = 0; q < n; ++q) T(n, q) = -c(q) / scale;
    std::vector<Index> basis(n);
    for (Index i = 0; i < n; ++i) basis[i] = n + i;

    const double eps = 1e-12;
    if (max_pivots <= 0) max_pivots = static_cast<int>(50 * n + 1000);
    int degenerate_run = 0;
    bool bland = false;
    for (;;) {
        Index enter = -1;
        double best = -eps;
        for (Index j = 0; j < 2 * n; ++j) {
            if (T(n, j) < best) {
                enter = j;
                if (bland) break;
                best = T(n, j);
            }
        }
        if (enter < 0) break;
        Index leave = -1;
        double ratio = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < n; ++i) {
            const double piv = T(i, enter);
            if (piv > eps) {
                const double r = T(i, 2 * n) / piv;
                if (r < ratio - 1e-14 || (std::abs(r - ratio) <= 1e-14 && leave >= 0 && basis[i] < basis[leave])) {
                    ratio = r;
                    leave = i;
                }
            }
        }
        if (leave < 0) throw NumericalError("covering LP: dual unbounded (zero column in M?)");
        degenerate_run = ratio <= eps ? degenerate_run + 1 : 0;
        if (degenerate_run > 2 * n) bland = true;

        const double p = T(leave, enter);
        T.row(leave) /= p;
        for (Index i = 0; i <= n; ++i) {
            if (i == leave) continue;
            const double f = T(i, enter);
            if (f != 0.0) T.row(i) -= f * T.row(leave);
        }
        basis[leave] = enter;
        if (++sol.pivots > max_pivots)
            throw NumericalError("covering LP: simplex did not converge");
    }
    for (Index i = 0; i < n; ++i) sol.a(i) = std::max(0.0, T(n, n + i)) * scale;
    sol.value = T(n, 2 * n) * scale;
    return sol;
}

}  // namespace bandlab
