// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "geomtext/gradcheck.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace geomtext {

namespace {

double eval_scalar(const std::function<Tensor()>& f, const std::string& where) {
    NoGradGuard guard;
    const Tensor t = f();
    const double v = t.value();
    if (!std::isfinite(v)) {
        throw std::runtime_error("finite_diff_check aborted: non-finite loss " + where);
    }
    return v;
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<Tensor()>& f, ModelParams& params,
                                  double step, double tol) {
    if (!(step > 0.0) || step > 1e-2) {
        throw std::invalid_argument("finite_diff_check: step must be in (0, 1e-2]");
    }

    params.zero_grads();
    Tensor loss = f();
    if (loss.numel() != 1) {
        throw std::invalid_argument("finite_diff_check: loss must be scalar");
    }
    if (!std::isfinite(loss.value())) {
        throw std::runtime_error("finite_diff_check aborted: non-finite loss at base point");
    }
    backward(loss);

    std::map<std::string, std::vector<double>> analytic;
    for (const auto& [name, t] : params) {
        analytic[name] = t.has_grad() ? t.grad() : std::vector<double>(t.numel(), 0.0);
    }

    GradCheckReport report;
    report.tol = tol;
    for (auto& [name, t] : params) {
        double worst = 0.0;
        std::vector<double>& values = t.mutable_data();
        for (std::size_t e = 0; e < values.size(); ++e) {
            const double saved = values[e];
            values[e] = saved + step;
            const double fp = eval_scalar(f, "at " + name + "[" + std::to_string(e) + "]+h");
            values[e] = saved - step;
            const double fm = eval_scalar(f, "at " + name + "[" + std::to_string(e) + "]-h");
            values[e] = saved;

            const double fd = (fp - fm) / (2.0 * step);
            const double an = analytic[name][e];
            const double denom = std::max({std::fabs(an), std::fabs(fd), 1e-2});
            const double rel = std::fabs(an - fd) / denom;
            worst = std::max(worst, rel);
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
                report.worst_entry = e;
            }
        }
        report.per_param.emplace_back(name, worst);
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

}  // namespace geomtext
