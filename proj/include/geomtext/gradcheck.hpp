// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "geomtext/params.hpp"
#include "geomtext/tensor.hpp"

namespace geomtext {

struct GradCheckReport {
    double tol = 1e-4;
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_entry = 0;
    std::vector<std::pair<std::string, double>> per_param;  // max rel err per tensor
    bool pass = false;
};

/**
 * Compares analytic gradients of a deterministic scalar loss against central
 * finite differences, entry by entry over every parameter. The relative
 * error denominator is floored at 1e-2 so near-zero gradients are judged on
 * an absolute scale. Throws if the loss evaluates non-finite.
 */
GradCheckReport finite_diff_check(const std::function<Tensor()>& f, ModelParams& params,
                                  double step = 1e-5, double tol = 1e-4);

}  // namespace geomtext
