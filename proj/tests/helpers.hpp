#pragma once

#include <cstdint>

#include "anil/task.hpp"
#include "anil/types.hpp"

namespace anil_test {

// Hand-built scalar task with an empty shared block:
//   adapted loss  1/2 a_in w^2 + c_in w
//   meta loss     1/2 a_out w^2 + c_out w
// Bypasses the sampler so tests control every coefficient exactly.
inline anil::TaskInstance scalar_task(double a_in, double c_in, double a_out, double c_out,
                                      std::int64_t id = 0) {
  anil::TaskInstance t;
  t.task_id = id;
  t.geometry = anil::Geometry::kStronglyConvex;
  t.mu = a_in;
  t.smoothness_L = a_in;

  t.inner.A = anil::Matrix::Constant(1, 1, a_in);
  t.inner.B = anil::Matrix(1, 0);
  t.inner.C = anil::Matrix(0, 0);
  t.inner.c_w = anil::Vector::Constant(1, c_in);
  t.inner.c_phi = anil::Vector(0);
  t.inner.sine = anil::Vector::Zero(1);

  t.outer = t.inner;
  t.outer.A = anil::Matrix::Constant(1, 1, a_out);
  t.outer.c_w = anil::Vector::Constant(1, c_out);
  return t;
}

// Hand-built scalar task with a one-dimensional shared block:
//   adapted loss  1/2 a_in w^2 + b_in w phi + c_in w
//   meta loss     1/2 a_out w^2 + b_out w phi + 1/2 q_out phi^2 + c_out w
inline anil::TaskInstance scalar_task_phi(double a_in, double b_in, double c_in, double a_out,
                                          double b_out, double q_out, double c_out,
                                          std::int64_t id = 0) {
  anil::TaskInstance t;
  t.task_id = id;
  t.geometry = anil::Geometry::kStronglyConvex;
  t.mu = a_in;
  t.smoothness_L = a_in;

  t.inner.A = anil::Matrix::Constant(1, 1, a_in);
  t.inner.B = anil::Matrix::Constant(1, 1, b_in);
  t.inner.C = anil::Matrix::Zero(1, 1);
  t.inner.c_w = anil::Vector::Constant(1, c_in);
  t.inner.c_phi = anil::Vector::Zero(1);
  t.inner.sine = anil::Vector::Zero(1);

  t.outer.A = anil::Matrix::Constant(1, 1, a_out);
  t.outer.B = anil::Matrix::Constant(1, 1, b_out);
  t.outer.C = anil::Matrix::Constant(1, 1, q_out);
  t.outer.c_w = anil::Vector::Constant(1, c_out);
  t.outer.c_phi = anil::Vector::Zero(1);
  t.outer.sine = anil::Vector::Zero(1);
  return t;
}

inline anil::SplitParameters point1(double w) {
  return anil::SplitParameters{anil::Vector::Constant(1, w), anil::Vector(0)};
}

inline anil::SplitParameters point2(double w, double phi) {
  return anil::SplitParameters{anil::Vector::Constant(1, w), anil::Vector::Constant(1, phi)};
}

// A small strongly convex family spec that the sampler accepts unchanged.
inline anil::TaskFamilySpec small_sc_spec(std::uint64_t seed = 42, anil::Index n_w = 4,
                                          anil::Index n_phi = 4) {
  anil::TaskFamilySpec spec;
  spec.geometry = anil::Geometry::kStronglyConvex;
  spec.mu = 0.5;
  spec.smoothness_L = 1.0;
  spec.lipschitz_M = 100.0;
  spec.rho = 0.0;
  spec.tau = 0.0;
  spec.n_w = n_w;
  spec.n_phi = n_phi;
  spec.seed = seed;
  return spec;
}

// A small nonconvex family spec that the sampler accepts unchanged.
inline anil::TaskFamilySpec small_nc_spec(std::uint64_t seed = 43, anil::Index n_w = 4,
                                          anil::Index n_phi = 4) {
  anil::TaskFamilySpec spec;
  spec.geometry = anil::Geometry::kNonconvex;
  spec.mu = 0.0;
  spec.smoothness_L = 1.0;
  spec.lipschitz_M = 100.0;
  spec.nonconvexity_amplitude = 0.4;
  spec.rho = 0.4;
  spec.tau = 0.4;
  spec.n_w = n_w;
  spec.n_phi = n_phi;
  spec.seed = seed;
  return spec;
}

}  // namespace anil_test
