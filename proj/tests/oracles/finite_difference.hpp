#pragma once

// Central finite-difference gradients, independent of the autodiff tape.

#include "beatforge/autodiff.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace beatforge::oracle {

// Relative error used by every gradient check: |a - n| / max(|a|, |n|, floor).
// The floor keeps parameters with (near) zero gradient from dividing rounding
// noise by zero.
double gradient_rel_error(double analytic, double numeric, double floor = 1e-6);

// d f / d x[i] for every i by (f(x + h) - f(x - h)) / 2h, restoring x afterwards.
std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> x, double h = 1e-5);

struct GradCheckReport {
    std::size_t checked = 0;
    std::size_t failed = 0;
    double worst_rel_error = 0.0;
    std::string worst_location;

    bool passed() const { return failed == 0; }
};

// Compares each parameter's .grad (already populated by the caller) with the
// finite-difference gradient of loss() over every scalar in the store.
GradCheckReport check_param_gradients(nn::ParamStore& params, const std::function<double()>& loss, double tol,
                                      double h = 1e-5);

}  // namespace beatforge::oracle
