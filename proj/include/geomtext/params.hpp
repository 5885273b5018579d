// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "geomtext/tensor.hpp"

namespace geomtext {

/**
 * Named collection of trainable tensors, keyed by dotted parameter paths
 * (e.g. "geom.l0.attn.wq"). Iteration is in lexicographic name order, which
 * keeps initialization and optimizer updates deterministic.
 */
class ModelParams {
public:
    Tensor& add(const std::string& name, Tensor t);
    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    std::vector<std::string> names() const;
    std::size_t size() const { return params_.size(); }
    std::size_t total_entries() const;
    void zero_grads();

    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }

private:
    std::map<std::string, Tensor> params_;
};

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), stream derived from (seed, name)
/// so values do not depend on creation order.
Tensor init_uniform_param(Shape shape, std::size_t fan_in, std::uint64_t seed,
                          std::string_view name);
Tensor init_zeros_param(Shape shape);
Tensor init_ones_param(Shape shape);

}  // namespace geomtext
