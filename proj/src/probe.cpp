// Copyright 2026 The ivgp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ivgp/probe.hpp"

#include <algorithm>

namespace ivgp {
namespace {

thread_local AllocationProbe *active_probe = nullptr;

} // namespace

AllocationProbe::AllocationProbe() : previous_(active_probe) { active_probe = this; }

AllocationProbe::~AllocationProbe() { active_probe = previous_; }

Eigen::Index AllocationProbe::peak_min_dim() const {
  Eigen::Index peak = 0;
  for (const auto &r : records_) peak = std::max(peak, std::min(r.rows, r.cols));
  return peak;
}

Eigen::Index AllocationProbe::peak_max_dim() const {
  Eigen::Index peak = 0;
  for (const auto &r : records_) peak = std::max({peak, r.rows, r.cols});
  return peak;
}

void AllocationProbe::note(const char *label, Eigen::Index rows, Eigen::Index cols) {
  if (active_probe) active_probe->records_.push_back({label, rows, cols});
}

} // namespace ivgp
