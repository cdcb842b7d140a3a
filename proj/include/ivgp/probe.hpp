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

#ifndef IVGP_PROBE_HPP_
#define IVGP_PROBE_HPP_

#include <Eigen/Core>

#include <string>
#include <vector>

namespace ivgp {

// Records the shapes of intermediate matrices built by the conditional code
// paths. Recording only happens on the current thread while a probe is alive,
// so the hooks cost a thread-local pointer check otherwise.
class AllocationProbe {
public:
  struct Record {
    std::string label;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
  };

  AllocationProbe();
  ~AllocationProbe();
  AllocationProbe(const AllocationProbe &) = delete;
  AllocationProbe &operator=(const AllocationProbe &) = delete;

  const std::vector<Record> &records() const { return records_; }
  // Largest min(rows, cols) seen, i.e. the biggest square a matrix contains.
  Eigen::Index peak_min_dim() const;
  Eigen::Index peak_max_dim() const;

  static void note(const char *label, Eigen::Index rows, Eigen::Index cols);
  template <typename Derived>
  static void note(const char *label, const Eigen::EigenBase<Derived> &m) {
    note(label, m.rows(), m.cols());
  }

private:
  std::vector<Record> records_;
  AllocationProbe *previous_ = nullptr;
};

} // namespace ivgp

#endif // IVGP_PROBE_HPP_
