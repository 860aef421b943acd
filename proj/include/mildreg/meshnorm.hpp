#pragma once

#include "mildreg/types.hpp"

#include <span>
#include <vector>

namespace mildreg {

enum class Boundary { Dirichlet, Neumann };

// Uniform grid on [0,1]. Dirichlet grids carry interior nodes only; Neumann
// grids include both boundary nodes.
class Grid1D {
 public:
  static Grid1D dirichlet(int n_interior);
  static Grid1D neumann(int n_nodes);

  int size() const { return static_cast<int>(nodes_.size()); }
  double h() const { return h_; }
  bool include_boundary() const { return boundary_ == Boundary::Neumann; }
  Boundary boundary() const { return boundary_; }
  const Vector& nodes() const { return nodes_; }
  double node(int j) const { return nodes_[j]; }

  // Trapezoidal mass weights: h everywhere, h/2 on boundary nodes.
  const Vector& weights() const { return weights_; }

  bool operator==(const Grid1D& other) const {
    return boundary_ == other.boundary_ && size() == other.size();
  }

 private:
  Grid1D(Boundary boundary, Vector nodes, double h);

  Boundary boundary_;
  Vector nodes_;
  Vector weights_;
  double h_;
};

class TimeMesh {
 public:
  TimeMesh(double t_start, double t_end, int m_steps);

  static TimeMesh uniform(double t_end, int m_steps) { return {0.0, t_end, m_steps}; }

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  int steps() const { return m_steps_; }
  int size() const { return m_steps_ + 1; }
  double dt() const { return dt_; }
  // Node times are t_start + i*dt, except the last which is exactly t_end.
  double node(int i) const { return i == m_steps_ ? t_end_ : t_start_ + i * dt_; }
  std::vector<double> nodes() const;

  // Sub-mesh covering nodes [first, first + m].
  TimeMesh slice(int first, int m) const;

 private:
  double t_start_;
  double t_end_;
  int m_steps_;
  double dt_;
};

// Time-indexed grid functions; column i holds the state at mesh node i.
struct Trajectory {
  Grid1D grid;
  TimeMesh mesh;
  Matrix states;

  Trajectory(Grid1D g, TimeMesh m);
  Trajectory(Grid1D g, TimeMesh m, Matrix s);

  auto state(int i) const { return states.col(i); }
  auto state(int i) { return states.col(i); }
};

// Trapezoidal weights for arbitrary increasing nodes.
std::vector<double> trapezoid_weights(std::span<const double> t);

double l2_norm(const Grid1D& grid, const Eigen::Ref<const Vector>& u);
// Per-column l2 norms.
Vector l2_norms(const Grid1D& grid, const Eigen::Ref<const Matrix>& states);

double lp_time_norm(const Grid1D& grid, const TimeMesh& mesh,
                    const Eigen::Ref<const Matrix>& states, double p);
double lp_time_norm(const Trajectory& v, double p);

// Central differences in the interior, first-order one-sided at the endpoints.
Matrix time_derivative(const TimeMesh& mesh, const Eigen::Ref<const Matrix>& states);

// ||u||_{W^{1,p}(X)} + ||u||_{L^p(D(A))} realised as L^p(u) + L^p(du/dt) + L^p(Au).
double mr_norm(const Trajectory& u, const Matrix& A, double p);

// Operator norm of M : (X, l2) -> (X, l2) under the trapezoidal mass.
double operator_norm(const Grid1D& grid, const Matrix& M);

}  // namespace mildreg
