#pragma once

// Reference implementations used only by the tests. None of this calls into
// the library, so agreement with it is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

namespace oracle {

struct Relaxation {
  std::vector<double> stress;
  std::multiset<std::size_t> toppled;
  std::size_t area = 0;
};

// Drive to threshold, then scan the whole grid each round, toppling every
// site at or above 1 simultaneously. Shares leaving the grid are lost.
inline Relaxation ofc_relax(std::vector<double> s, std::size_t rows, std::size_t cols, double alpha) {
  double top = 0.0;
  for (double x : s) top = std::max(top, x);
  for (double &x : s) x += 1.0 - top;
  Relaxation out;
  std::set<std::size_t> distinct;
  for (;;) {
    std::vector<std::size_t> hot;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= 1.0) hot.push_back(i);
    if (hot.empty()) break;
    std::vector<double> gain(s.size(), 0.0);
    for (std::size_t i : hot) {
      const long r = static_cast<long>(i / cols), c = static_cast<long>(i % cols);
      const long nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto &p : nb) {
        if (p[0] < 0 || p[1] < 0 || p[0] >= static_cast<long>(rows) || p[1] >= static_cast<long>(cols)) continue;
        gain[static_cast<std::size_t>(p[0]) * cols + static_cast<std::size_t>(p[1])] += alpha * s[i];
      }
      out.toppled.insert(i);
      distinct.insert(i);
    }
    for (std::size_t i : hot) s[i] = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += gain[i];
  }
  out.stress = std::move(s);
  out.area = distinct.size();
  return out;
}

using Grid = std::vector<std::vector<int>>;

inline double complexity(const Grid &g) {
  const std::size_t n = g.size(), k = g[0].size();
  std::size_t pairs = 0, differ = 0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c) {
      if (c + 1 < k) {
        ++pairs;
        differ += g[r][c] != g[r][c + 1];
      }
      if (r + 1 < n) {
        ++pairs;
        differ += g[r][c] != g[r + 1][c];
      }
    }
  return pairs ? static_cast<double>(differ) / static_cast<double>(pairs) : 0.0;
}

inline double order(const Grid &g) {
  const std::size_t n = g.size(), k = g[0].size();
  auto frac = [&](auto image) {
    std::size_t same = 0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < k; ++c) {
        const auto [rr, cc] = image(r, c);
        same += g[r][c] == g[rr][cc];
      }
    return static_cast<double>(same) / static_cast<double>(n * k);
  };
  double sum = frac([&](std::size_t r, std::size_t c) { return std::pair{r, k - 1 - c}; });
  sum += frac([&](std::size_t r, std::size_t c) { return std::pair{n - 1 - r, c}; });
  sum += frac([&](std::size_t r, std::size_t c) { return std::pair{n - 1 - r, k - 1 - c}; });
  if (n != k) return sum / 3.0;
  sum += frac([&](std::size_t r, std::size_t c) { return std::pair{c, r}; });
  return sum / 4.0;
}

// Integer areas whose CCDF above x_min falls as A^-b: a continuous Pareto
// with scale x_min - 1/2, rounded to the nearest integer.
inline std::vector<std::uint64_t> pareto_areas(double b, double x_min, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint64_t> out(n);
  for (auto &a : out) {
    const double x = (x_min - 0.5) * std::pow(1.0 - u(gen), -1.0 / b);
    a = static_cast<std::uint64_t>(std::floor(x + 0.5));
  }
  return out;
}

// Zero crossings of a sampled signal, upward only, linearly interpolated.
inline std::vector<double> rising_crossings(const std::vector<double> &x, double dt) {
  std::vector<double> t;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i - 1] < 0.0 && x[i] >= 0.0) t.push_back(dt * (static_cast<double>(i - 1) + x[i - 1] / (x[i - 1] - x[i])));
  return t;
}

}  // namespace oracle
