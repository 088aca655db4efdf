#pragma once

#include "bandlab/common.hpp"

namespace bandlab {

struct CoveringSolution {
    double value = 0.0;
    Vec a;           // primal minimiser, a >= 0
    int pivots = 0;
};

// min sum(a)  s.t.  M^T a >= c,  a >= 0,  for M >= 0 entrywise with no zero column
// and c >= 0. Solved through its packing dual  max c.y  s.t.  M y <= 1, y >= 0,
// whose slack basis is feasible from the start.
CoveringSolution solve_covering_lp(const Mat& M, const Vec& c, int max_pivots = 0);

}  // namespace bandlab
