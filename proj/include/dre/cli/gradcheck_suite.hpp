/*
 * Copyright 2026 The DRE Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <vector>

#include "dre/numerics/gradcheck.hpp"

namespace dre::cli {

struct GradcheckEntry {
  std::string loss;
  std::size_t aux_tokens = 0;
  std::uint64_t seed = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

struct GradcheckSuiteOptions {
  std::vector<std::size_t> aux_tokens{2, 3};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double tolerance = 1e-4;
};

/// Checks one loss and records whether its worst relative error is under tolerance.
GradcheckEntry check_loss(const std::string& loss, std::size_t aux_tokens, std::uint64_t seed,
                          const LossBuilder& build, const std::vector<Tensor<double>>& inputs, double tolerance);

/// Every loss term and composite on random 64-bit inputs, per S and seed.
std::vector<GradcheckEntry> run_gradcheck_suite(const GradcheckSuiteOptions& options = {});

/// Worst entry per (loss, S), one line each: `PASS|FAIL <loss> S=<s> max_rel_err=<e>`.
std::string format_gradcheck(const std::vector<GradcheckEntry>& entries);

bool all_passed(const std::vector<GradcheckEntry>& entries);

}  // namespace dre::cli
