#pragma once

// Central finite-difference oracle used to check reverse-mode gradients.
// Lives in test code only; it never touches the autodiff path it verifies.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "irn/adam.hpp"
#include "irn/tensor.hpp"

namespace testsupport {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    long worst_index = -1;
    long checked = 0;
};

// f() must rebuild the graph from the current parameter values and return the
// scalar loss tensor. Relative error uses an absolute floor so near-zero
// gradients do not blow up the ratio.
template <typename T>
inline GradCheckResult gradcheck(irn::ParamList<T>& params,
                                 const std::function<irn::Tensor<T>()>& f, double step = 1e-4,
                                 double floor_val = 1e-6, long max_per_param = -1) {
    GradCheckResult res;
    irn::zero_grads(params);
    irn::Tensor<T> loss = f();
    irn::backward(loss);
    std::vector<std::vector<T>> analytic;
    for (auto& p : params) analytic.push_back(p.tensor.raw_grad());

    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& value = params[pi].tensor.raw();
        long n = long(value.size());
        long limit = max_per_param < 0 ? n : std::min(n, max_per_param);
        for (long j = 0; j < limit; ++j) {
            T keep = value[size_t(j)];
            value[size_t(j)] = keep + T(step);
            double up = double(f().item());
            value[size_t(j)] = keep - T(step);
            double down = double(f().item());
            value[size_t(j)] = keep;
            double fd = (up - down) / (2.0 * step);
            double an = double(analytic[pi][size_t(j)]);
            double denom = std::max({std::fabs(fd), std::fabs(an), floor_val});
            double rel = std::fabs(fd - an) / denom;
            ++res.checked;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = params[pi].name;
                res.worst_index = j;
            }
        }
    }
    return res;
}

}  // namespace testsupport
