#pragma once

#include <optional>

#include "bandlab/common.hpp"
#include "bandlab/ensemble.hpp"

namespace bandlab {

enum class ObservableTag { special, traceless_special, identity, general };

// Diagonal observable held as its diagonal.
struct DiagObservable {
    Vec diag;
    ObservableTag tag = ObservableTag::general;
    int x = -1;                       // anchor for special / traceless_special
    std::optional<Vec> certificate;   // minimiser a of the triple norm LP
    std::optional<double> norm;       // |||A|||

    int size() const { return static_cast<int>(diag.size()); }
    double trace() const { return diag.sum(); }
};

DiagObservable make_special_observable(const VarianceProfile& p, int x);
DiagObservable make_identity_observable(int N);
DiagObservable make_general_observable(const Vec& diag);
DiagObservable traceless_part(const DiagObservable& A);

}  // namespace bandlab
