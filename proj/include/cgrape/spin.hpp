#pragma once

// Small fixed-size complex linear algebra for a single spin-1/2 (2x2) and an
// electron-nucleus pair (4x4).
//
// Units: frequencies in MHz (ordinary, not angular), times in microseconds.
// The 2*pi that converts MHz*us into radians is applied inside step_unitary
// and by callers of expm_hermitian through the `scale` argument.

#include <complex>

#include <Eigen/Dense>

namespace cgrape::spin {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class Axis { x, y, z };

Mat2 pauli(Axis axis);

/// Kronecker product a (x) b; `a` acts on the first (electron) factor.
Mat4 kron(const Mat2& a, const Mat2& b);

/// Piecewise-constant drive for one time slice.
struct StepFields {
  double delta = 0.0;    // MHz
  double omega_x = 0.0;  // MHz
  double omega_y = 0.0;  // MHz
  double dt = 0.0;       // us
};

/// exp(-2*pi*i*(delta/2 sz + omega_x/2 sx + omega_y/2 sy)*dt), closed form.
Mat2 step_unitary(const StepFields& fields);

/// Step unitary together with its exact partial derivatives with respect to
/// omega_x and omega_y (not the first-order -i*2*pi*dt*sigma/2*U estimate).
struct StepJet {
  Mat2 u;
  Mat2 du_domega_x;
  Mat2 du_domega_y;
};

StepJet step_unitary_jet(const StepFields& fields);

/// tr(A^dagger B).
template <typename Derived1, typename Derived2>
cplx hs_overlap(const Eigen::MatrixBase<Derived1>& a,
                const Eigen::MatrixBase<Derived2>& b) {
  static_assert(Derived1::RowsAtCompileTime == Derived2::RowsAtCompileTime ||
                    Derived1::RowsAtCompileTime == Eigen::Dynamic ||
                    Derived2::RowsAtCompileTime == Eigen::Dynamic,
                "hs_overlap: dimension mismatch");
  return (a.adjoint() * b).trace();
}

/// Runtime-sized overload; throws std::invalid_argument on shape mismatch.
cplx hs_overlap_dynamic(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

/// exp(-i*scale*H) for Hermitian H, via eigendecomposition.
/// Throws std::invalid_argument if H is not Hermitian to 1e-12.
Mat2 expm_hermitian(const Mat2& h, double scale);
Mat4 expm_hermitian(const Mat4& h, double scale);

/// exp(-i*scale*H) by scaling-and-squaring Taylor series. Much cheaper than
/// the eigendecomposition for the many tiny slices of a pulse; does not
/// check hermiticity.
Mat4 expm_series(const Mat4& h, double scale);

/// max |U^dagger U - I|.
template <typename Derived>
double unitarity_error(const Eigen::MatrixBase<Derived>& u) {
  using M = Eigen::Matrix<cplx, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  const M prod = u.adjoint() * u;
  return (prod - M::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

/// max |H - H^dagger|.
template <typename Derived>
double hermiticity_error(const Eigen::MatrixBase<Derived>& h) {
  return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

/// exp(-i*theta/2 * sigma_axis), the ideal rotation used as a gate target.
Mat2 rotation(Axis axis, double theta);

}  // namespace cgrape::spin
