#pragma once

// Central finite differences on callables taking a coordinate span.  Used
// wherever a field does not carry an exact gradient hook.  The Richardson
// variant combines steps h and h/2 for an O(h^4) first derivative.

#include <span>
#include <vector>

namespace isospec::fd {

inline constexpr double default_step = 1e-5;

template <typename F>
double partial(F&& f, std::span<const double> x, int axis, double h) {
  std::vector<double> p(x.begin(), x.end());
  auto ax = static_cast<std::size_t>(axis);
  p[ax] = x[ax] + h;
  double fp = f(std::span<const double>(p));
  p[ax] = x[ax] - h;
  double fm = f(std::span<const double>(p));
  return (fp - fm) / (2.0 * h);
}

template <typename F>
double partial_richardson(F&& f, std::span<const double> x, int axis, double h) {
  double d_h = partial(f, x, axis, h);
  double d_h2 = partial(f, x, axis, 0.5 * h);
  return (4.0 * d_h2 - d_h) / 3.0;
}

template <typename F>
std::vector<double> gradient(F&& f, std::span<const double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = partial(f, x, static_cast<int>(i), h);
  return g;
}

template <typename F>
double second_partial(F&& f, std::span<const double> x, int axis, double h) {
  std::vector<double> p(x.begin(), x.end());
  auto ax = static_cast<std::size_t>(axis);
  double f0 = f(std::span<const double>(p));
  p[ax] = x[ax] + h;
  double fp = f(std::span<const double>(p));
  p[ax] = x[ax] - h;
  double fm = f(std::span<const double>(p));
  return (fp - 2.0 * f0 + fm) / (h * h);
}

template <typename F>
double laplacian(F&& f, std::span<const double> x, double h) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += second_partial(f, x, static_cast<int>(i), h);
  return total;
}

// One Richardson step kills the h^2 term: error ~ h^4 f^(6)/90 + eps/h^2.
template <typename F>
double laplacian_richardson(F&& f, std::span<const double> x, double h) {
  return (4.0 * laplacian(f, x, 0.5 * h) - laplacian(f, x, h)) / 3.0;
}

}  // namespace isospec::fd
