#pragma once

#include <functional>
#include <span>
#include <stdexcept>

#include "fgd/tensor.hpp"

namespace fgd {

/// Raised when the probed function returns a non-finite value.
class OracleError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct GradcheckReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    std::size_t elements_checked = 0;
    bool passed = false;
};

/// Denominator floor: max(kGradcheckFloor, kGradcheckRelativeFloor * max|analytic|).
/// Components far below the gradient's overall scale are judged on absolute error,
/// which keeps finite-difference round-off on exact zeros from reading as failure.
inline constexpr double kGradcheckFloor = 1e-8;
inline constexpr double kGradcheckRelativeFloor = 1e-6;

/// Compares backward() against central differences.
///
/// `f` must rebuild its graph from `inputs` on each call; inputs are perturbed
/// in place and restored. Per element the error is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradcheckReport gradcheck(const std::function<Tensor()>& f, std::span<Tensor> inputs, double step,
                          double rel_tol);

}  // namespace fgd
