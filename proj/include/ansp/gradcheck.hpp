#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ansp/tensor.hpp"

namespace ansp {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_leaf = 0;
    std::size_t worst_entry = 0;
    double analytic = 0.0;
    double numeric = 0.0;

    bool ok(double tol) const { return max_rel_err < tol; }
};

// Central-difference check of backward() against a forward-only oracle.
// build must reconstruct the same scalar from the given leaves on every call;
// perturbations go through the leaf storage, so captured handles see them.
// Relative error uses max(1, |analytic|, |numeric|) as the denominator, which
// keeps near-zero gradients from drowning in finite-difference noise.
inline GradCheckReport check_gradients(std::vector<Tensor>& leaves,
                                       const std::function<Tensor(Tape&)>& build,
                                       double h = 1e-4) {
    for (auto& leaf : leaves) {
        leaf.set_requires_grad(true);
        leaf.zero_grad();
    }
    std::vector<std::vector<double>> analytic(leaves.size());
    {
        Tape tape;
        Tensor y = build(tape);
        tape.backward(y);
        for (std::size_t l = 0; l < leaves.size(); ++l)
            analytic[l].assign(leaves[l].grad().begin(), leaves[l].grad().end());
    }

    auto eval = [&] {
        Tape tape;
        tape.set_recording(false);
        return build(tape).item();
    };

    GradCheckReport report;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        auto vals = leaves[l].values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + h;
            const double up = eval();
            vals[i] = saved - h;
            const double down = eval();
            vals[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[l][i];
            const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_leaf = l;
                report.worst_entry = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace ansp
