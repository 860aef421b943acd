#include "mildreg/expm.hpp"

#include <array>
#include <cmath>

namespace mildreg {

namespace {

double one_norm(const Matrix& A) { return A.cwiseAbs().colwise().sum().maxCoeff(); }

// Pade coefficients b_0..b_m for the diagonal approximants of exp.
constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                          25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0,
                                           302702400.0,   30270240.0,   2162160.0,
                                           110880.0,      3960.0,       90.0,
                                           1.0};
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

// Largest 1-norms for which degree 3, 5, 7, 9, 13 meet unit roundoff.
constexpr std::array<double, 5> kTheta = {1.495585217958292e-2, 2.539398330063230e-1,
                                          9.504178996162932e-1, 2.097847961257068e0,
                                          5.371920351148152e0};

template <std::size_t N>
Matrix pade_low(const Matrix& A, const std::array<double, N>& b) {
  const Eigen::Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = A * A;
  Matrix U_inner = b[1] * I;
  Matrix V = b[0] * I;
  Matrix power = I;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * A2;
    U_inner += b[k + 1] * power;
    V += b[k] * power;
  }
  const Matrix U = A * U_inner;
  return (V - U).partialPivLu().solve(V + U);
}

Matrix pade13(const Matrix& A) {
  const auto& b = kPade13;
  const Eigen::Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = A * A;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A4 * A2;
  const Matrix U =
      A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  const Matrix V =
      A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
  return (V - U).partialPivLu().solve(V + U);
}

}  // namespace

Matrix expm(const Matrix& A) {
  require(A.rows() == A.cols(), "expm needs a square matrix");
  if (A.size() == 0) return A;
  const double norm = one_norm(A);
  if (!std::isfinite(norm)) throw Error(ErrorCode::Overflow, "expm input is not finite");
  if (norm <= kTheta[0]) return pade_low(A, kPade3);
  if (norm <= kTheta[1]) return pade_low(A, kPade5);
  if (norm <= kTheta[2]) return pade_low(A, kPade7);
  if (norm <= kTheta[3]) return pade_low(A, kPade9);

  const int s = std::max(0, static_cast<int>(std::ceil(std::log2(norm / kTheta[4]))));
  Matrix E = pade13(A / std::ldexp(1.0, s));
  for (int k = 0; k < s; ++k) E = E * E;
  if (!E.allFinite()) throw Error(ErrorCode::Overflow, "matrix exponential overflowed");
  return E;
}

PhiFunctions phi_functions(const Matrix& Z) {
  const Eigen::Index n = Z.rows();
  Matrix big = Matrix::Zero(3 * n, 3 * n);
  big.topLeftCorner(n, n) = Z;
  big.block(0, n, n, n).setIdentity();
  big.block(n, 2 * n, n, n).setIdentity();
  const Matrix E = expm(big);
  return {E.topLeftCorner(n, n), E.block(0, n, n, n), E.block(0, 2 * n, n, n)};
}

double phi1(double z) {
  if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
  return std::expm1(z) / z;
}

double phi2(double z) {
  if (std::abs(z) < 1e-3) return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0;
  return (std::expm1(z) - z) / (z * z);
}

}  // namespace mildreg
