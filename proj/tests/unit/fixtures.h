// Copyright 2026 The defex Authors.
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

// Small worlds and helpers shared by the unit suites.

#ifndef DEFEX_TESTS_UNIT_FIXTURES_H_
#define DEFEX_TESTS_UNIT_FIXTURES_H_

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "defex/encoder.h"
#include "defex/error.h"
#include "defex/rng.h"
#include "defex/synthetic.h"
#include "defex/training.h"
#include "doctest.h"

namespace defex::testing {

inline SyntheticSpec TinySpec() {
  SyntheticSpec s;
  s.n_types = 4;
  s.n_distractors = 6;
  s.instances_per_definition = 4;
  s.distractor_instances_per_definition = 4;
  s.mentions_per_type = 4;
  return s;
}

inline EncoderConfig TinyEncoder() {
  EncoderConfig c;
  c.embedding_dim = 16;
  c.n_heads = 2;
  return c;
}

inline DualEncoderModel TinyModel(const SyntheticData& data, uint64_t seed = 1) {
  std::vector<Tokens> extra;
  for (const auto& t : data.ontology.types()) extra.push_back(t.definition);
  return InitializeModel(TinyEncoder(), data.corpus, extra, seed);
}

inline Vector RandomVector(Rng& rng, size_t d) {
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.Normal();
  return v;
}

inline Vector Vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Fresh directory under the build tree, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::path(DEFEX_TEST_TMP) /
            ("t" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Runs f and returns the error category it throws, or nothing.
template <typename F>
std::optional<ErrorKind> ErrorOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace defex::testing

#endif  // DEFEX_TESTS_UNIT_FIXTURES_H_
