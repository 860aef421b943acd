#include "mildreg/meshnorm.hpp"

#include <cmath>

namespace mildreg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::NoWindow: return "NO_WINDOW";
    case ErrorCode::NonContractive: return "NON_CONTRACTIVE";
    case ErrorCode::MaxIter: return "MAX_ITER";
    case ErrorCode::Config: return "CONFIG";
    case ErrorCode::Unresolved: return "UNRESOLVED";
    case ErrorCode::Singular: return "SINGULAR";
    case ErrorCode::Overflow: return "OVERFLOW";
    case ErrorCode::Io: return "IO";
  }
  return "UNKNOWN";
}

Grid1D::Grid1D(Boundary boundary, Vector nodes, double h)
    : boundary_(boundary), nodes_(std::move(nodes)), h_(h) {
  weights_ = Vector::Constant(nodes_.size(), h_);
  if (boundary_ == Boundary::Neumann) {
    weights_[0] = h_ / 2;
    weights_[weights_.size() - 1] = h_ / 2;
  }
}

Grid1D Grid1D::dirichlet(int n_interior) {
  require(n_interior >= 1, "Dirichlet grid needs at least one interior node");
  const double h = 1.0 / (n_interior + 1);
  Vector x(n_interior);
  for (int j = 0; j < n_interior; ++j) x[j] = (j + 1) * h;
  return {Boundary::Dirichlet, std::move(x), h};
}

Grid1D Grid1D::neumann(int n_nodes) {
  require(n_nodes >= 2, "Neumann grid needs at least two nodes");
  const double h = 1.0 / (n_nodes - 1);
  Vector x(n_nodes);
  for (int j = 0; j < n_nodes; ++j) x[j] = j * h;
  x[n_nodes - 1] = 1.0;
  return {Boundary::Neumann, std::move(x), h};
}

TimeMesh::TimeMesh(double t_start, double t_end, int m_steps)
    : t_start_(t_start), t_end_(t_end), m_steps_(m_steps) {
  require(m_steps >= 1, "time mesh needs at least one step");
  require(t_end > t_start, "time mesh needs t_end > t_start");
  dt_ = (t_end - t_start) / m_steps;
}

std::vector<double> TimeMesh::nodes() const {
  std::vector<double> t(size());
  for (int i = 0; i < size(); ++i) t[i] = node(i);
  return t;
}

TimeMesh TimeMesh::slice(int first, int m) const {
  require(first >= 0 && m >= 1 && first + m <= m_steps_, "time mesh slice out of range");
  return {node(first), node(first + m), m};
}

Trajectory::Trajectory(Grid1D g, TimeMesh m)
    : grid(std::move(g)), mesh(m), states(Matrix::Zero(grid.size(), mesh.size())) {}

Trajectory::Trajectory(Grid1D g, TimeMesh m, Matrix s)
    : grid(std::move(g)), mesh(m), states(std::move(s)) {
  require(states.rows() == grid.size() && states.cols() == mesh.size(),
          "trajectory shape does not match grid and mesh");
}

std::vector<double> trapezoid_weights(std::span<const double> t) {
  std::vector<double> w(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double half = 0.5 * (t[i] - t[i - 1]);
    w[i - 1] += half;
    w[i] += half;
  }
  return w;
}

double l2_norm(const Grid1D& grid, const Eigen::Ref<const Vector>& u) {
  require(u.size() == grid.size(), "state length does not match grid");
  return std::sqrt(grid.weights().dot(u.cwiseAbs2()));
}

Vector l2_norms(const Grid1D& grid, const Eigen::Ref<const Matrix>& states) {
  require(states.rows() == grid.size(), "state length does not match grid");
  return (states.cwiseAbs2().transpose() * grid.weights()).cwiseSqrt();
}

double lp_time_norm(const Grid1D& grid, const TimeMesh& mesh,
                    const Eigen::Ref<const Matrix>& states, double p) {
  require(p > 1.0, "L^p time norm requires p > 1");
  require(states.cols() == mesh.size(), "trajectory length does not match mesh");
  const Vector norms = l2_norms(grid, states);
  const double dt = mesh.dt();
  double sum = 0.0;
  for (int i = 0; i < mesh.size(); ++i) {
    const double w = (i == 0 || i == mesh.steps()) ? 0.5 * dt : dt;
    sum += w * std::pow(norms[i], p);
  }
  return std::pow(sum, 1.0 / p);
}

double lp_time_norm(const Trajectory& v, double p) {
  return lp_time_norm(v.grid, v.mesh, v.states, p);
}

Matrix time_derivative(const TimeMesh& mesh, const Eigen::Ref<const Matrix>& states) {
  const int m = mesh.steps();
  require(states.cols() == mesh.size(), "trajectory length does not match mesh");
  const double dt = mesh.dt();
  Matrix du(states.rows(), states.cols());
  du.col(0) = (states.col(1) - states.col(0)) / dt;
  du.col(m) = (states.col(m) - states.col(m - 1)) / dt;
  for (int i = 1; i < m; ++i) du.col(i) = (states.col(i + 1) - states.col(i - 1)) / (2 * dt);
  return du;
}

double mr_norm(const Trajectory& u, const Matrix& A, double p) {
  require(A.rows() == u.grid.size() && A.cols() == u.grid.size(),
          "operator dimension does not match grid");
  const Matrix du = time_derivative(u.mesh, u.states);
  const Matrix Au = A * u.states;
  return lp_time_norm(u, p) + lp_time_norm(u.grid, u.mesh, du, p) +
         lp_time_norm(u.grid, u.mesh, Au, p);
}

double operator_norm(const Grid1D& grid, const Matrix& M) {
  const Vector s = grid.weights().cwiseSqrt();
  const Matrix T = s.asDiagonal() * M * s.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Matrix> svd(T);
  return svd.singularValues()(0);
}

}  // namespace mildreg
