#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

#include "reclink/train.hpp"

namespace reclink::testing {

inline constexpr double kFdStep = 1e-4;

// Five-point central difference of g'(0), where g(h) evaluates the function
// with one coordinate moved by h.
inline double central_difference(const std::function<double(double)>& g) {
  const double h = kFdStep;
  return (-g(2 * h) + 8 * g(h) - 8 * g(-h) + g(-2 * h)) / (12 * h);
}

// Entry-wise relative error |a - f| / max(|a|, |f|); entries where both
// magnitudes are below `floor` are compared absolutely against it instead.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < floor) return std::abs(analytic - numeric) / floor;
  return std::abs(analytic - numeric) / scale;
}

// Max relative error of grad(z) against central differences of f.
inline double max_grad_error(const Matrix<double>& z, const Matrix<double>& grad,
                             const std::function<double(const Matrix<double>&)>& f) {
  double worst = 0;
  auto probe = z;
  for (std::size_t i = 0; i < z.data.size(); ++i) {
    const double x = probe.data[i];
    const double numeric = central_difference([&](double h) {
      probe.data[i] = x + h;
      const double v = f(probe);
      probe.data[i] = x;
      return v;
    });
    worst = std::max(worst, relative_error(grad.data[i], numeric));
  }
  return worst;
}

// Runs `python3 script` and parses the single number it prints.
inline double run_scalar_script(const std::string& script) {
  const std::string cmd = "python3 \"" + script + "\"";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) throw std::runtime_error("cannot run " + script);
  char buf[128] = {};
  if (!std::fgets(buf, sizeof buf, pipe.get())) throw std::runtime_error("no output from " + script);
  return std::stod(buf);
}

// Inputs shared with tests/scripts/supcon_oracle.py.
inline Matrix<double> supcon_fixture_points() {
  Matrix<double> z(4, 2);
  const double pts[4][2] = {{1.0, 0.0}, {0.6, 0.8}, {0.0, 1.0}, {-0.8, 0.6}};
  for (std::size_t i = 0; i < 4; ++i) {
    z(i, 0) = pts[i][0];
    z(i, 1) = pts[i][1];
  }
  return z;
}
inline const std::vector<std::size_t> kSupconFixtureClasses{0, 0, 1, 1};
inline constexpr double kSupconFixtureTemperature = 0.5;

// Inputs shared with tests/scripts/online_contrastive_oracle.py: a positive
// pair at cosine distance 0.6 and a negative pair at 0.2.
inline Matrix<double> online_fixture_points() {
  Matrix<double> z(4, 2);
  z(0, 0) = 1.0;
  z(1, 0) = 0.4;
  z(1, 1) = std::sqrt(1.0 - 0.4 * 0.4);
  z(2, 0) = 1.0;
  z(3, 0) = 0.8;
  z(3, 1) = std::sqrt(1.0 - 0.8 * 0.8);
  return z;
}
inline const std::vector<int> kOnlineFixtureLabels{1, 0};
inline constexpr double kOnlineFixtureMargin = 0.5;

}  // namespace reclink::testing
