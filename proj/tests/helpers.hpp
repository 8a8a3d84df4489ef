#pragma once

#include "gains/core_math.hpp"
#include "gains/model.hpp"

#include <initializer_list>
#include <random>

namespace testing {

inline gains::Vector vec(std::initializer_list<double> xs) {
  gains::Vector v(static_cast<gains::Index>(xs.size()));
  gains::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline gains::Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = static_cast<gains::Index>(rows.size());
  const auto c = static_cast<gains::Index>(rows.begin()->size());
  gains::Matrix m(r, c);
  gains::Index i = 0;
  for (const auto& row : rows) {
    gains::Index j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return m;
}

inline gains::Box box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
  return gains::Box(vec(lo), vec(hi));
}

inline gains::Vector sample(const gains::Box& b, std::mt19937_64& rng) {
  gains::Vector x(b.dim());
  for (gains::Index i = 0; i < b.dim(); ++i) x[i] = gains::uniform(rng, b.lower()[i], b.upper()[i]);
  return x;
}

/// dz/dt = W z + b as a model with no encoder or decoder.
inline gains::ModelSpec linear_ode(const gains::Matrix& w, const gains::Vector& b,
                                   const gains::SolverConfig& cfg) {
  gains::ModelSpec m;
  m.dynamics = gains::Dynamics({gains::Layer::linear(w, b)}, w.rows());
  m.solver = cfg;
  m.output = gains::OutputRole::Regression;
  return m;
}

}  // namespace testing
