#pragma once

#include "streamhead/generator/flow.hpp"
#include "streamhead/numerics/autodiff.hpp"
#include "streamhead/numerics/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace testing {

using streamhead::numerics::Array;
using streamhead::numerics::Shape;
using streamhead::numerics::Var;

// Same layout as the defaults, narrower so gradient checks and loops stay fast.
inline streamhead::generator::ModelConfig small_model() {
    streamhead::generator::ModelConfig mc;
    mc.hidden = 8;
    mc.blocks = 1;
    return mc;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

struct GradCheck {
    double worst = 0.0;
    std::size_t checked = 0;
};

// Central differences (step h) of f over every element of every input, against backward().
// f must build its graph from the Vars it is handed.
inline GradCheck check_gradients(const std::function<Var(const std::vector<Var> &)> & f, std::vector<Array> inputs,
                                 double h = 1e-6) {
    std::vector<Var> params;
    for (const auto & a : inputs) params.push_back(Var::parameter(a));
    const auto grads = streamhead::numerics::backward(f(params));
    GradCheck out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Array g = grads[params[i]];
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            auto eval = [&](double delta) {
                std::vector<Var> ps;
                for (std::size_t q = 0; q < inputs.size(); ++q) {
                    Array a = inputs[q];
                    if (q == i) a[j] += delta;
                    ps.push_back(Var::parameter(std::move(a)));
                }
                return f(ps).value().item();
            };
            const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
            out.worst = std::max(out.worst, rel_err(g[j], numeric));
            ++out.checked;
        }
    }
    return out;
}

inline Array random_array(Shape shape, streamhead::numerics::Rng & rng, double scale = 1.0) {
    Array a = rng.normal_array(std::move(shape));
    for (double & v : a.data()) v *= scale;
    return a;
}

} // namespace testing
