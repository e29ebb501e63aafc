#include "fgd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fgd {

namespace {

double evaluate(const std::function<Tensor()>& f) {
    Tensor out = f();
    if (out.numel() != 1) throw ContractError("gradcheck: function must return a scalar");
    const double v = out.item();
    if (!std::isfinite(v)) throw OracleError("gradcheck: function returned a non-finite value");
    return v;
}

}  // namespace

GradcheckReport gradcheck(const std::function<Tensor()>& f, std::span<Tensor> inputs, double step,
                          double rel_tol) {
    if (!(step > 0.0)) throw ParameterError("gradcheck: step must be positive");

    for (auto& in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }
    {
        Tensor out = f();
        if (out.numel() != 1) throw ContractError("gradcheck: function must return a scalar");
        if (!std::isfinite(out.item())) throw OracleError("gradcheck: function returned a non-finite value");
        backward(out);
    }

    double scale = 0.0;
    for (auto& in : inputs) {
        if (!in.has_grad()) continue;
        for (double g : in.grad()) scale = std::max(scale, std::abs(g));
    }
    const double floor = std::max(kGradcheckFloor, kGradcheckRelativeFloor * scale);

    GradcheckReport report;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Tensor& in = inputs[k];
        std::vector<double> analytic(in.numel(), 0.0);
        if (in.has_grad()) std::copy(in.grad().begin(), in.grad().end(), analytic.begin());

        auto vals = in.mutable_values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + step;
            const double up = evaluate(f);
            vals[i] = orig - step;
            const double down = evaluate(f);
            vals[i] = orig;
            const double numeric = (up - down) / (2.0 * step);

            const double abs_err = std::abs(analytic[i] - numeric);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
            const double rel = abs_err / denom;
            report.max_abs_error = std::max(report.max_abs_error, abs_err);
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_input = k;
                report.worst_index = i;
            }
            ++report.elements_checked;
        }
    }
    for (auto& in : inputs) in.zero_grad();
    report.passed = report.max_rel_error <= rel_tol;
    return report;
}

}  // namespace fgd
