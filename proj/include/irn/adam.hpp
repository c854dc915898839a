#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "irn/tensor.hpp"

namespace irn {

template <typename T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
inline void zero_grads(ParamList<T>& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

// Adam with bias-corrected moments. Moment buffers are lazily shaped to the
// parameter list on the first step and serialize into checkpoints.
template <typename T>
struct AdamState {
    T lr = T(2e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    long t = 0;
    std::vector<std::vector<T>> m, v;

    void reset_moments() {
        m.clear();
        v.clear();
        t = 0;
    }
};

template <typename T>
inline void adam_step(ParamList<T>& params, AdamState<T>& state) {
    if (state.m.size() != params.size()) {
        check(state.m.empty() && state.t == 0,
              "adam_step: optimizer state does not match parameter list");
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            size_t n = params[i].tensor.data().size();
            state.m[i].assign(n, T(0));
            state.v[i].assign(n, T(0));
        }
    }
    state.t += 1;
    T c1 = T(1) - T(std::pow(double(state.beta1), double(state.t)));
    T c2 = T(1) - T(std::pow(double(state.beta2), double(state.t)));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& value = params[i].tensor.raw();
        auto& grad = params[i].tensor.raw_grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        check(m.size() == value.size(), "adam_step: moment shape mismatch for " + params[i].name);
        for (size_t j = 0; j < value.size(); ++j) {
            T g = grad[j];
            if (!std::isfinite(double(g)))
                fail("adam_step: non-finite gradient in parameter '" + params[i].name + "'");
            m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * g * g;
            T mhat = m[j] / c1;
            T vhat = v[j] / c2;
            value[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace irn
