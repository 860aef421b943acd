#pragma once

#include "mildreg/types.hpp"

namespace mildreg {

// exp(A) by scaling and squaring with diagonal Pade approximants of degree
// 3, 5, 7, 9 or 13, selected from the 1-norm of A.
Matrix expm(const Matrix& A);

// exp(Z), phi1(Z) = Z^{-1}(e^Z - I) and phi2(Z) = Z^{-2}(e^Z - I - Z), read off
// the exponential of the block matrix [[Z, I, 0], [0, 0, I], [0, 0, 0]].
struct PhiFunctions {
  Matrix exp;
  Matrix phi1;
  Matrix phi2;
};

PhiFunctions phi_functions(const Matrix& Z);

// Scalar counterparts, accurate near z = 0.
double phi1(double z);
double phi2(double z);

}  // namespace mildreg
