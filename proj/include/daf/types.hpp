// Copyright 2026 The DAF Navigation Authors
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

#ifndef DAF_TYPES_HPP_
#define DAF_TYPES_HPP_

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace daf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid environment, parameters or scenario content.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A query point lies on (or numerically next to) the skeleton of the
/// obstacle region, so the nearest boundary point is not unique.
class NonUniqueProjection : public Error {
 public:
  using Error::Error;
};

/// Clearance to the obstacle region dropped to zero or below.
class SafetyViolation : public Error {
 public:
  SafetyViolation(const std::string& what, double clearance)
      : Error(what), clearance_(clearance) {}
  double clearance() const { return clearance_; }

 private:
  double clearance_;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

inline Vector make_vector(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

}  // namespace daf

#endif  // DAF_TYPES_HPP_
