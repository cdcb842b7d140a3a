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

#include <gtest/gtest.h>

#include <functional>

#include "ivgp/conditionals.hpp"
#include "ivgp/covariances.hpp"
#include "ivgp/dispatch.hpp"
#include "ivgp/divergences.hpp"
#include "ivgp/errors.hpp"

namespace ivgp {
namespace {

// A -> {B -> C, D} for the first argument, X -> Y -> Z for the second.
struct Fixture {
  TypeHierarchy first{"A"};
  TypeHierarchy second{"X"};
  Fixture() {
    first.add("B", "A");
    first.add("C", "B");
    first.add("D", "A");
    second.add("Y", "X");
    second.add("Z", "Y");
  }
};

using Fn = std::function<int()>;

TEST(TypeHierarchy, AncestorsAndIsA) {
  Fixture f;
  EXPECT_EQ(f.first.ancestors("C"), (std::vector<std::string>{"C", "B", "A"}));
  EXPECT_TRUE(f.first.is_a("C", "A"));
  EXPECT_FALSE(f.first.is_a("D", "B"));
  EXPECT_THROW(f.first.add("E", "missing"), Error);
  EXPECT_THROW(f.first.add("B", "D"), Error);
  EXPECT_NO_THROW(f.first.add("B", "A"));
}

TEST(DispatchRegistry, MostSpecificEntryWins) {
  Fixture f;
  DispatchRegistry<Fn> r("test", f.first, f.second);
  r.add("A", "X", [] { return 1; });
  r.add("B", "X", [] { return 2; });
  r.add("B", "Y", [] { return 3; });
  EXPECT_EQ(r.resolve("A", "Z")(), 1);
  EXPECT_EQ(r.resolve("D", "Z")(), 1);
  EXPECT_EQ(r.resolve("C", "X")(), 2);
  EXPECT_EQ(r.resolve("C", "Z")(), 3);
  EXPECT_EQ(r.which("C", "Z").first, "B");
  EXPECT_EQ(r.which("C", "Z").second, "Y");
}

TEST(DispatchRegistry, IncomparableCandidatesAreAmbiguous) {
  Fixture f;
  DispatchRegistry<Fn> r("test", f.first, f.second);
  r.add("B", "X", [] { return 1; });
  r.add("A", "Y", [] { return 2; });
  try {
    r.resolve("B", "Y");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::AmbiguityDetected);
  }
  EXPECT_THROW(r.freeze(), Error);
  // A tie-breaking entry removes the ambiguity.
  r.add("B", "Y", [] { return 3; });
  EXPECT_NO_THROW(r.freeze());
  EXPECT_EQ(r.resolve("C", "Z")(), 3);
}

TEST(DispatchRegistry, MissingDuplicateAndFrozen) {
  Fixture f;
  DispatchRegistry<Fn> r("test", f.first, f.second);
  r.add("B", "Y", [] { return 1; });
  try {
    r.resolve("D", "Z");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::NoImplementation);
  }
  try {
    r.add("B", "Y", [] { return 2; });
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateRegistration);
  }
  r.freeze();
  try {
    r.add("A", "X", [] { return 2; });
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::RegistryFrozen);
  }
}

TEST(DispatchRegistry, UnknownTagIsNoImplementation) {
  Fixture f;
  DispatchRegistry<Fn> r("test", f.first, f.second);
  r.add("A", "X", [] { return 1; });
  EXPECT_THROW(r.resolve("Q", "X"), Error);
}

TEST(ShippedRegistries, AreUnambiguous) {
  // Every pair of known tags must resolve to one entry or to none.
  for (const auto &a : inducing_types().tags())
    for (const auto &b : kernel_types().tags()) {
      for (auto check : {+[](const std::string &x, const std::string &y) { kuu_registry().which(x, y); },
                         +[](const std::string &x, const std::string &y) { kuf_registry().which(x, y); },
                         +[](const std::string &x, const std::string &y) { conditional_registry().which(x, y); },
                         +[](const std::string &x, const std::string &y) { prior_kl_registry().which(x, y); }}) {
        try {
          check(a, b);
        } catch (const Error &e) {
          EXPECT_EQ(e.code(), ErrorCode::NoImplementation) << a << " " << b << ": " << e.what();
        }
      }
    }
}

TEST(ShippedRegistries, SelectEfficientPaths) {
  EXPECT_EQ(conditional_registry().which("SharedIndependentInducingVariables", "IntrinsicCoregionalization").second,
            "LinearCoregionalization");
  EXPECT_EQ(conditional_registry().which("InducingPoints", "SharedIndependent").second, "MultioutputKernel");
  EXPECT_EQ(kuu_registry().which("Multiscale", "SquaredExponential").first, "Multiscale");
  EXPECT_EQ(conditional_registry().which("Multiscale", "Matern32").first, "InducingVariable");
}

} // namespace
} // namespace ivgp
