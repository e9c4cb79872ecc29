#pragma once

#include <cstddef>
#include <functional>

#include "negcnn/tape.hpp"
#include "negcnn/tensor.hpp"

namespace negcnn {

// A scalar-valued program of one tensor argument, written against a tape.
using ScalarProgram = std::function<Var<double>(Tape<double>&, const Var<double>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t checked = 0;
  // Coordinates where the one-sided differences disagree (a kink such as
  // relu at exactly 0); they are left out of the maximum.
  std::size_t excluded = 0;
};

// Compares the reverse-mode gradient of `f` at `point` against central
// differences with step h. Relative error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// Throws NumericError naming the coordinate when f is not finite.
GradCheckResult grad_check(const ScalarProgram& f, const TensorD& point, double h = 1e-5);

}  // namespace negcnn
