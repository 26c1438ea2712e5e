#ifndef DMA_KERNELS_HPP
#define DMA_KERNELS_HPP

#include "dma/types.hpp"

#include <cmath>
#include <string>

namespace dma
{
  enum class KernelFamily
  {
    ExpAbsCos,   // exp(-a1 |tau|) cos(a2 tau)
    ExpQuad,     // exp(-a1 tau^2)
    ExpQuadCos   // exp(-a1 tau^2) cos(a2 tau)
  };

  template <typename Scalar>
  struct CovKernel
  {
    KernelFamily family = KernelFamily::ExpQuad;
    Scalar alpha1 = Scalar(1);
    Scalar alpha2 = Scalar(0);
  };

  inline std::string kernel_family_name(KernelFamily family)
  {
    switch (family)
    {
      case KernelFamily::ExpAbsCos: return "exp_abs_cos";
      case KernelFamily::ExpQuad:   return "exp_quad";
      case KernelFamily::ExpQuadCos:return "exp_quad_cos";
    }
    return "unknown";
  }

  template <typename Scalar>
  void validate_kernel(const CovKernel<Scalar>& k)
  {
    if (!(k.alpha1 > Scalar(0)))
      throw ConfigError("kernel alpha1 must be > 0, got " + std::to_string(static_cast<double>(k.alpha1)));
    if (!(k.alpha2 >= Scalar(0)))
      throw ConfigError("kernel alpha2 must be >= 0, got " + std::to_string(static_cast<double>(k.alpha2)));
    if (k.family == KernelFamily::ExpQuad && k.alpha2 != Scalar(0))
      throw ConfigError("exp_quad takes no alpha2");
  }

  template <typename Scalar>
  Scalar eval_kernel(const CovKernel<Scalar>& k, Scalar tau)
  {
    using std::abs;
    using std::cos;
    using std::exp;
    switch (k.family)
    {
      case KernelFamily::ExpAbsCos:
        return exp(-k.alpha1 * abs(tau)) * cos(k.alpha2 * tau);
      case KernelFamily::ExpQuad:
        return exp(-k.alpha1 * tau * tau);
      case KernelFamily::ExpQuadCos:
        return exp(-k.alpha1 * tau * tau) * cos(k.alpha2 * tau);
    }
    return Scalar(0);
  }

  enum class BasisKind
  {
    Polynomial,     // f_j(t) = t^(j-1), j = 1..degree+1
    GaussianCurve   // single function exp(-theta (t - t0)^2)
  };

  template <typename Scalar>
  struct RegressionBasis
  {
    BasisKind kind = BasisKind::Polynomial;
    int degree = 0;                 // Polynomial only, 0..3
    Scalar theta = Scalar(1);       // GaussianCurve width
    Scalar t0 = Scalar(0);          // GaussianCurve center

    Index size() const noexcept
    {
      return kind == BasisKind::Polynomial ? degree + 1 : 1;
    }
  };

  template <typename Scalar>
  void validate_basis(const RegressionBasis<Scalar>& b)
  {
    if (b.kind == BasisKind::Polynomial && (b.degree < 0 || b.degree > 3))
      throw ConfigError("polynomial degree must be in 0..3, got " + std::to_string(b.degree));
    if (b.kind == BasisKind::GaussianCurve && !(b.theta > Scalar(0)))
      throw ConfigError("gaussian curve width theta must be > 0");
  }

  template <typename Scalar>
  Scalar eval_basis(const RegressionBasis<Scalar>& b, Index j, Scalar t)
  {
    using std::exp;
    if (b.kind == BasisKind::GaussianCurve)
      return exp(-b.theta * (t - b.t0) * (t - b.t0));
    Scalar v = Scalar(1);
    for (Index q = 0; q < j; ++q)
      v *= t;
    return v;
  }

  template <typename Scalar>
  std::string basis_name(const RegressionBasis<Scalar>& b)
  {
    if (b.kind == BasisKind::Polynomial)
      return "poly" + std::to_string(b.degree);
    return "gauss";
  }
}

#endif
