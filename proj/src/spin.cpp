#include "cgrape/spin.hpp"

#include <cmath>
#include <stdexcept>

namespace cgrape::spin {

namespace {

constexpr double kPi = kTwoPi / 2.0;
constexpr double kHermitianTol = 1e-12;

// sin(a)/a
double sinc(double a) {
  if (std::abs(a) < 1e-4) {
    const double a2 = a * a;
    return 1.0 - a2 / 6.0 + a2 * a2 / 120.0;
  }
  return std::sin(a) / a;
}

// (a cos a - sin a) / a^3, i.e. sinc'(a)/a
double sinc_slope(double a) {
  if (std::abs(a) < 1e-2) {
    const double a2 = a * a;
    return -1.0 / 3.0 + a2 / 30.0 - a2 * a2 / 840.0;
  }
  return (a * std::cos(a) - std::sin(a)) / (a * a * a);
}

template <typename M>
M expm_eigen(const M& h, double scale) {
  if (hermiticity_error(h) > kHermitianTol) {
    throw std::invalid_argument("expm_hermitian: matrix is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<M> solver(h);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("expm_hermitian: eigendecomposition failed");
  }
  const auto& vecs = solver.eigenvectors();
  const auto& vals = solver.eigenvalues();
  M phases = M::Zero();
  for (Eigen::Index k = 0; k < vals.size(); ++k) {
    phases(k, k) = std::polar(1.0, -scale * vals(k));
  }
  return vecs * phases * vecs.adjoint();
}

}  // namespace

Mat2 pauli(Axis axis) {
  Mat2 m;
  switch (axis) {
    case Axis::x:
      m << 0.0, 1.0, 1.0, 0.0;
      break;
    case Axis::y:
      m << 0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0;
      break;
    case Axis::z:
      m << 1.0, 0.0, 0.0, -1.0;
      break;
  }
  return m;
}

Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    }
  }
  return out;
}

Mat2 step_unitary(const StepFields& f) {
  // exp(-i a n.sigma) = cos(a) I - i sin(a) n.sigma with a = pi*dt*|v|,
  // written with sinc so that |v| -> 0 needs no special case.
  const double c = kPi * f.dt;
  const double a = c * std::sqrt(f.delta * f.delta + f.omega_x * f.omega_x +
                                 f.omega_y * f.omega_y);
  const double cs = std::cos(a);
  const double s = c * sinc(a);
  Mat2 u;
  u(0, 0) = cplx(cs, -s * f.delta);
  u(1, 1) = cplx(cs, s * f.delta);
  u(0, 1) = cplx(-s * f.omega_y, -s * f.omega_x);
  u(1, 0) = cplx(s * f.omega_y, -s * f.omega_x);
  return u;
}

StepJet step_unitary_jet(const StepFields& f) {
  const double c = kPi * f.dt;
  const double a = c * std::sqrt(f.delta * f.delta + f.omega_x * f.omega_x +
                                 f.omega_y * f.omega_y);
  const double sc = sinc(a);
  const double slope = sinc_slope(a);

  StepJet jet;
  jet.u = step_unitary(f);

  // v.sigma with v = (omega_x, omega_y, delta)
  Mat2 v_sigma;
  v_sigma << f.delta, cplx(f.omega_x, -f.omega_y), cplx(f.omega_x, f.omega_y),
      -f.delta;

  const cplx minus_i(0.0, -1.0);
  auto derivative = [&](double vk, Axis axis) -> Mat2 {
    const double c2 = c * c;
    Mat2 d = -c2 * vk * sc * Mat2::Identity();
    d += minus_i * c * (c2 * vk * slope * v_sigma + sc * pauli(axis));
    return d;
  };
  jet.du_domega_x = derivative(f.omega_x, Axis::x);
  jet.du_domega_y = derivative(f.omega_y, Axis::y);
  return jet;
}

cplx hs_overlap_dynamic(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("hs_overlap: dimension mismatch");
  }
  return (a.adjoint() * b).trace();
}

Mat2 expm_hermitian(const Mat2& h, double scale) { return expm_eigen(h, scale); }

Mat4 expm_hermitian(const Mat4& h, double scale) { return expm_eigen(h, scale); }

Mat4 expm_series(const Mat4& h, double scale) {
  const Mat4 a = cplx(0.0, -scale) * h;
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.25) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
  }
  const Mat4 b = a / std::ldexp(1.0, squarings);

  Mat4 result = Mat4::Identity();
  Mat4 term = Mat4::Identity();
  for (int k = 1; k <= 30; ++k) {
    term = (term * b) / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  for (int k = 0; k < squarings; ++k) {
    result = result * result;
  }
  return result;
}

Mat2 rotation(Axis axis, double theta) {
  return std::cos(theta / 2.0) * Mat2::Identity() -
         cplx(0.0, std::sin(theta / 2.0)) * pauli(axis);
}

}  // namespace cgrape::spin
