/*
 Copyright 2026 The hcs Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Self-checks on random instances: kernel identities, Riccati boundary
// conditions and the convex program against the closed form.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hcs {

struct VerifyCheck {
  std::string suite;
  std::string name;
  double residual = 0.0;  // worst value over the instances
  double tolerance = 0.0;
  int instances = 0;

  bool pass() const { return residual <= tolerance; }  // NaN fails
};

struct VerifyOptions {
  std::uint64_t seed = 2026;
  int instances = 100;
  // Negative control: flips the sign of every Phi12 block before the kernel
  // identities are evaluated.
  bool flip_phi12_sign = false;
};

/// suite is one of kernels, riccati, sdp, all. Throws `config-error` otherwise.
std::vector<VerifyCheck> run_verify(const std::string& suite, const VerifyOptions& options = {});

}  // namespace hcs
