// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "geomtext/params.hpp"

#include <cmath>
#include <stdexcept>

#include "geomtext/rng.hpp"

namespace geomtext {

Tensor& ModelParams::add(const std::string& name, Tensor t) {
    if (!t.requires_grad()) {
        throw std::invalid_argument("ModelParams: \"" + name + "\" must require gradients");
    }
    auto [it, inserted] = params_.emplace(name, std::move(t));
    if (!inserted) {
        throw std::invalid_argument("ModelParams: duplicate parameter \"" + name + "\"");
    }
    return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) {
        throw std::invalid_argument("ModelParams: unknown parameter \"" + name + "\"");
    }
    return it->second;
}

const Tensor& ModelParams::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) {
        throw std::invalid_argument("ModelParams: unknown parameter \"" + name + "\"");
    }
    return it->second;
}

std::vector<std::string> ModelParams::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, t] : params_) out.push_back(name);
    return out;
}

std::size_t ModelParams::total_entries() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

void ModelParams::zero_grads() {
    for (auto& [name, t] : params_) t.zero_grad();
}

Tensor init_uniform_param(Shape shape, std::size_t fan_in, std::uint64_t seed,
                          std::string_view name) {
    if (fan_in == 0) throw std::invalid_argument("init_uniform_param: fan_in must be positive");
    RngStream rng(derive_seed(seed, "init", fnv1a64(name)));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    std::vector<double> data(n);
    for (double& v : data) v = rng.uniform(-bound, bound);
    return Tensor::param(std::move(data), std::move(shape));
}

Tensor init_zeros_param(Shape shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return Tensor::param(std::vector<double>(n, 0.0), std::move(shape));
}

Tensor init_ones_param(Shape shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return Tensor::param(std::vector<double>(n, 1.0), std::move(shape));
}

}  // namespace geomtext
