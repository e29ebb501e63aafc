#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fgd {

enum class GradcheckScope { ops, masks, gcblock, losses, all };

GradcheckScope parse_gradcheck_scope(std::string_view name);
std::string_view to_string(GradcheckScope scope);

inline constexpr double kGradcheckStep = 1e-4;
/// Tolerance for smooth terms.
inline constexpr double kSmoothTolerance = 1e-4;
/// Tolerance for terms that pass through L1 or relu kinks.
inline constexpr double kKinkTolerance = 1e-3;

struct GradcheckResult {
    std::string name;
    GradcheckScope scope;
    double max_rel_error = 0;
    double tolerance = 0;
    bool passed = false;
};

/// Runs every finite-difference check in `scope` on seeded random instances.
std::vector<GradcheckResult> run_gradcheck_suite(GradcheckScope scope);

/// "<name> max_rel_err=<e> tol=<t> PASS|FAIL"
std::string format_gradcheck_line(const GradcheckResult& r);

}  // namespace fgd
