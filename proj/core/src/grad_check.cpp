#include "negcnn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "negcnn/errors.hpp"

namespace negcnn {

namespace {

double evaluate(const ScalarProgram& f, const TensorD& x, std::size_t coordinate) {
  Tape<double> tape;
  const Var<double> in = tape.constant(x);
  const double value = f(tape, in).value().item();
  if (!std::isfinite(value)) {
    throw NumericError("grad_check: non-finite function value when perturbing coordinate " +
                       std::to_string(coordinate));
  }
  return value;
}

}  // namespace

GradCheckResult grad_check(const ScalarProgram& f, const TensorD& point, double h) {
  if (!(h > 0.0)) throw ContractError("grad_check: step must be positive");

  Tape<double> tape;
  const Var<double> x = tape.parameter(point);
  const Var<double> y = f(tape, x);
  if (!std::isfinite(y.value().item())) {
    throw NumericError("grad_check: non-finite function value at the base point");
  }
  tape.backward(y);
  const TensorD analytic = tape.grad(x);

  GradCheckResult result;
  TensorD probe = point;
  const double f0 = y.value().item();
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double a = analytic[i];
    if (!std::isfinite(a)) {
      throw NumericError("grad_check: non-finite analytic gradient at coordinate " +
                         std::to_string(i));
    }
    const double original = probe[i];
    probe[i] = original + h;
    const double fp = evaluate(f, probe, i);
    probe[i] = original - h;
    const double fm = evaluate(f, probe, i);
    probe[i] = original;

    const double forward = (fp - f0) / h;
    const double backward = (f0 - fm) / h;
    const double jump = std::abs(forward - backward);
    if (jump > 1e-10 && jump > 1e-2 * std::max(std::abs(forward), std::abs(backward))) {
      ++result.excluded;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double err = std::abs(a - numeric) / denom;
    ++result.checked;
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_coordinate = i;
    }
  }
  return result;
}

}  // namespace negcnn
