#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpca/curves.hpp"

namespace fpca {

using ShapeFn = std::function<double(double)>;

struct KlComponent {
  double eigenvalue = 0.0;
  ShapeFn shape;
};

// Karhunen-Loeve generator: X(t) = mean(t) + sum_k xi_k shape_k(t) with
// xi_k ~ N(0, eigenvalue_k), observed at m_i uniform times with additive
// N(0, sigma2) noise, m_i uniform on {obs_min, ..., obs_max}.
struct KlSpec {
  double t_min = 0.0;
  double t_max = 1.0;
  ShapeFn mean;
  std::vector<KlComponent> components;
  double sigma2 = 0.0;
  int obs_min = 2;
  int obs_max = 8;
};

struct SimulatedCohort {
  std::vector<LongitudinalSample> samples;
  // n x K matrix of the scores actually drawn; for multi-group cohorts K is
  // the widest group and narrower rows are zero padded on the right.
  Eigen::MatrixXd scores;
};

struct GroupSpec {
  std::string label;
  int n = 0;
  KlSpec spec;
};

// Throws std::invalid_argument when the domain is degenerate, eigenvalues are
// not positive and non-increasing, or the shapes fail a 201-point trapezoid
// orthonormality check at tolerance 1e-3.
void validate_spec(const KlSpec& spec);

SimulatedCohort simulate_cohort(const KlSpec& spec, int n, std::uint64_t seed,
                                const std::string& id_prefix = "subj");

SimulatedCohort simulate_groups(const std::vector<GroupSpec>& groups, std::uint64_t seed);

// Orthonormal shape families on [t_min, t_max].
ShapeFn legendre_shape(int degree, double t_min, double t_max);
ShapeFn fourier_sine_shape(int k, double t_min, double t_max);
// Linear interpolation through (times, values); times must be strictly
// increasing and queries are clamped to the tabulated range.
ShapeFn tabulated_shape(std::vector<double> times, std::vector<double> values);

// Two-component linear-trend process on [0, 15]: mean 50 - 2t, eigenvalues
// (9, 4) with constant and slope eigenfunctions, sigma2 = 4, 2 to 8
// observations per subject.
KlSpec default_oracle_spec();

}  // namespace fpca
