#include "bandlab/observables.hpp"

namespace bandlab {

DiagObservable make_special_observable(const VarianceProfile& p, int x) {
    if (x < 0 || x >= p.N) throw ArgumentError("make_special_observable: index out of range");
    DiagObservable A;
    A.diag = p.S.row(x).transpose();
    A.tag = ObservableTag::special;
    A.x = x;
    A.certificate = Vec::Unit(p.N, x);
    A.norm = 1.0;
    return A;
}

DiagObservable make_identity_observable(int N) {
    DiagObservable A;
    A.diag = Vec::Ones(N);
    A.tag = ObservableTag::identity;
    return A;
}

DiagObservable make_general_observable(const Vec& diag) {
    DiagObservable A;
    A.diag = diag;
    return A;
}

DiagObservable traceless_part(const DiagObservable& A) {
    DiagObservable B;
    const double mean = A.diag.mean();
    B.diag = A.diag.array() - mean;
    switch (A.tag) {
        case ObservableTag::special:
        case ObservableTag::traceless_special:
            B.tag = ObservableTag::traceless_special;
            B.x = A.x;
            break;
        default:
            B.tag = ObservableTag::general;
    }
    return B;
}

}  // namespace bandlab
