#pragma once

#include <bit>
#include <cstdint>

#include "ssgc/autograd.hpp"

namespace ssgc {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t worst_index = 0;
  std::size_t flagged = 0;  // entries above tolerance
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  double tolerance = 1e-4;

  bool ok() const { return max_rel_err < tolerance; }
};

// Relative error with a small absolute floor in the denominator, so entries
// whose true gradient sits at finite-difference noise level are judged by
// absolute error instead.
inline double grad_rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares the tape gradient of a scalar function against central
// differences for every entry of every parameter in `params`. The function
// must build its graph on the given tape, binding parameters via
// tape.param(params.at(name)).
inline GradCheckReport grad_check(const std::function<Var(Tape&)>& f, ParamSet& params, double h = 1e-5,
                                  double tolerance = 1e-4) {
  auto eval = [&] {
    Tape t;
    return f(t).item();
  };
  const double base = eval();
  if (std::bit_cast<std::uint64_t>(base) != std::bit_cast<std::uint64_t>(eval()))
    throw Error(ErrorCode::NonDeterministicFunction, "two evaluations at the same point differ");

  params.zero_grad();
  {
    Tape t;
    t.backward(f(t));
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& p : params) {
    GradCheckEntry entry;
    entry.name = p.name;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.data[i];
      p.value.data[i] = orig + h;
      const double up = eval();
      p.value.data[i] = orig - h;
      const double down = eval();
      p.value.data[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p.grad[i];
      const double rel = grad_rel_error(analytic, numeric);
      if (rel > tolerance) ++entry.flagged;
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = i;
      }
      entry.max_abs_err = std::max(entry.max_abs_err, std::abs(analytic - numeric));
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ssgc
