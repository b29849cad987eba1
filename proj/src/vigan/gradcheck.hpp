// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// Central finite-difference checks of reverse-mode gradients, in f64.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vigan/layers.hpp"
#include "vigan/rng.hpp"

namespace vigan {

inline constexpr double kGradStep = 1e-5;
inline constexpr double kOpTolerance = 1e-5;
inline constexpr double kObjectiveTolerance = 1e-3;

/// |a - n| / max(|a|, |n|, 1e-3)
double relative_error(double analytic, double numeric);

using MultiFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

struct CheckOptions {
  double h = kGradStep;
  std::optional<OpKind> fault;  // corrupts this op's backward rule on the analytic tape
};

struct CheckStats {
  double max_error = 0;
  std::int64_t checks = 0;
};

/// Compares the vector-Jacobian product of f (upstream gradient drawn from
/// `rng`, 1 for scalar outputs) with central differences of the projected
/// output, for every coordinate of the first `n_wrt` inputs.
CheckStats check_inputs(const MultiFn& f, const std::vector<Tensor<double>>& inputs, std::size_t n_wrt, Rng& rng,
                        const CheckOptions& options = {});

/// Gradient of a scalar objective built on `params` with respect to every
/// trainable parameter under `prefix`.
CheckStats check_params(const std::function<Var<double>(Forward<double>&)>& objective, ParamStore<double>& params,
                        const std::string& prefix, const CheckOptions& options = {});

struct GradCheckResult {
  std::string name;
  std::string kind;  // "op", "loss" or "objective"
  double max_error = 0;
  double tolerance = 0;
  std::int64_t checks = 0;
  std::int64_t points = 0;

  bool passed() const { return max_error < tolerance; }
};

struct SuiteOptions {
  /// "all", "ops", "losses", "objectives", or one case name.
  std::string module = "all";
  std::optional<OpKind> fault;
  std::uint64_t seed = 7;
  int op_points = 25;
  int objective_points = 3;
};

std::vector<std::string> gradcheck_case_names();

/// Throws std::invalid_argument for an unknown module.
std::vector<GradCheckResult> run_gradcheck_suite(const SuiteOptions& options = {});

}  // namespace vigan
