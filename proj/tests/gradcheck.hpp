#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "transfact/autodiff.hpp"
#include "transfact/rng.hpp"

namespace gradcheck {

using transfact::ad::Graph;
using transfact::ad::Matrix;
using transfact::ad::Var;

// Relative error with an absolute floor so that entries whose true gradient
// is ~0 are judged on absolute scale. Central differences at step 1e-5 carry
// ~1e-11 of round-off on O(1) outputs, so a floor much below 1e-4 measures
// round-off rather than the gradient.
inline double rel_error(double a, double b, double floor = 1e-4) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Reduces a matrix output to a scalar with fixed random weights.
inline Var random_contraction(Var out, std::uint64_t seed) {
    transfact::Rng rng(seed);
    std::vector<transfact::ad::Pick> picks;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            picks.push_back({r, c, rng.normal()});
        }
    }
    return transfact::ad::pick_sum(out, std::move(picks));
}

/// Max relative error between backprop and central differences over every
/// entry of every input.
inline double max_error(const std::function<Var(Graph&, const std::vector<Var>&)>& f, std::vector<Matrix> inputs,
                        double step = 1e-5) {
    Graph g;
    std::vector<Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        vars.push_back(g.parameter(inputs[i], static_cast<int>(i)));
    }
    const Var out = f(g, vars);
    g.backward(out);
    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Matrix analytic = g.grad(vars[i]);
        for (Eigen::Index k = 0; k < inputs[i].size(); ++k) {
            const double orig = inputs[i].data()[k];
            auto eval = [&](double v) {
                inputs[i].data()[k] = v;
                Graph h;
                std::vector<Var> hv;
                for (std::size_t j = 0; j < inputs.size(); ++j) {
                    hv.push_back(h.constant(inputs[j]));
                }
                return transfact::ad::scalar(f(h, hv));
            };
            const double numeric = (eval(orig + step) - eval(orig - step)) / (2 * step);
            inputs[i].data()[k] = orig;
            worst = std::max(worst, rel_error(analytic.data()[k], numeric));
        }
    }
    return worst;
}

inline Matrix random_matrix(transfact::Rng& rng, int r, int c, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.normal(0.0, scale);
    }
    return m;
}

} // namespace gradcheck
