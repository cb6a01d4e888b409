#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "faultlab/nncore/tensor.hpp"

namespace faultlab::nn {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// Symmetric relative error with a floor that keeps near-zero gradients from
/// dominating.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic) + std::abs(numeric), floor});
}

/// Compares analytic gradients against central differences, parameter by
/// parameter. `loss` must evaluate the model through `params` (it is called
/// with each entry perturbed in place and restored afterwards).
inline GradCheckResult gradient_check(const ParamViews& params, const ParamViews& analytic,
                                      const std::function<double()>& loss, double step = 1e-5) {
    require_shape(params.size() == analytic.size(), "gradient_check: group count mismatch");
    GradCheckResult res;
    std::size_t flat = 0;
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        require_shape(params[gi].size() == analytic[gi].size(), "gradient_check: group size mismatch");
        for (std::size_t j = 0; j < params[gi].size(); ++j, ++flat) {
            double& w = params[gi][j];
            const double saved = w;
            w = saved + step;
            const double up = loss();
            w = saved - step;
            const double down = loss();
            w = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double err = relative_error(analytic[gi][j], numeric);
            if (err > res.max_rel_error) {
                res.max_rel_error = err;
                res.worst_index = flat;
            }
            ++res.checked;
        }
    }
    return res;
}

}  // namespace faultlab::nn
