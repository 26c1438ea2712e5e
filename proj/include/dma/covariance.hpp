#ifndef DMA_COVARIANCE_HPP
#define DMA_COVARIANCE_HPP

#include "dma/kernels.hpp"
#include "dma/types.hpp"

#include <cmath>
#include <sstream>

namespace dma
{
  template <typename Scalar>
  struct CovOptions
  {
    Scalar jitter = Scalar(0);           // added to the diagonal, capped at 1e-10
    Scalar variance_scale = Scalar(1);   // global multiplier on the whole matrix
  };

  template <typename Scalar>
  void validate_grid(const VecX<Scalar>& t)
  {
    if (t.size() < 1)
      throw ConfigError("grid must contain at least one point");
    for (Index i = 0; i < t.size(); ++i)
      if (!std::isfinite(static_cast<double>(t[i])))
        throw ConfigError("grid points must be finite");
    for (Index i = 0; i + 1 < t.size(); ++i)
      if (!(t[i] < t[i + 1]))
      {
        std::ostringstream msg;
        msg << "grid must be strictly increasing, violated at index " << i + 1;
        throw ConfigError(msg.str());
      }
  }

  template <typename Scalar>
  VecX<Scalar> equidistant_grid(Index n, Scalar lo, Scalar hi)
  {
    if (n < 1)
      throw ConfigError("grid must contain at least one point");
    if (n == 1)
      return VecX<Scalar>::Constant(1, lo);
    if (!(lo < hi))
      throw ConfigError("grid domain must satisfy lo < hi");
    VecX<Scalar> t(n);
    for (Index i = 0; i < n; ++i)
      t[i] = lo + (hi - lo) * Scalar(i) / Scalar(n - 1);
    return t;
  }

  // Every table in the study uses 16 points; the spacing 0.21 keeps the
  // squared-exponential matrices far from singular while preserving the
  // strong-correlation regime where GLS beats OLS by orders of magnitude.
  template <typename Scalar>
  VecX<Scalar> default_grid()
  {
    return equidistant_grid<Scalar>(16, Scalar(0), Scalar(3.15));
  }

  template <typename Scalar>
  MatX<Scalar> build_cov_matrix(const CovKernel<Scalar>& k, const VecX<Scalar>& t,
                                const CovOptions<Scalar>& opts = {})
  {
    validate_kernel(k);
    validate_grid(t);
    if (!(opts.jitter >= Scalar(0)) || opts.jitter > Scalar(1e-10))
      throw ConfigError("jitter must lie in [0, 1e-10]");
    if (!(opts.variance_scale > Scalar(0)))
      throw ConfigError("variance scale must be > 0");

    const Index n = t.size();
    MatX<Scalar> gram(n, n);
    for (Index i = 0; i < n; ++i)
    {
      gram(i, i) = opts.variance_scale * (Scalar(1) + opts.jitter);
      for (Index j = i + 1; j < n; ++j)
      {
        const Scalar v = opts.variance_scale * eval_kernel(k, t[i] - t[j]);
        gram(i, j) = v;
        gram(j, i) = v;
      }
    }

    Eigen::LLT<MatX<Scalar>> llt(gram);
    if (llt.info() != Eigen::Success)
    {
      std::ostringstream msg;
      msg << kernel_family_name(k.family) << "(" << k.alpha1 << "," << k.alpha2
          << ") covariance is not positive definite at n=" << n
          << " (rcond estimate " << llt.rcond() << ")";
      throw NotPositiveDefinite(msg.str());
    }
    return gram;
  }

  template <typename Scalar>
  MatX<Scalar> build_design_matrix(const RegressionBasis<Scalar>& b, const VecX<Scalar>& t)
  {
    validate_basis(b);
    validate_grid(t);
    const Index p = b.size();
    const Index n = t.size();
    if (n < p)
      throw RankDeficient("design matrix needs at least as many points as basis functions");

    MatX<Scalar> F(p, n);
    for (Index j = 0; j < p; ++j)
      for (Index i = 0; i < n; ++i)
        F(j, i) = eval_basis(b, j, t[i]);

    Eigen::ColPivHouseholderQR<MatX<Scalar>> qr(F.transpose());
    if (qr.rank() < p)
      throw RankDeficient("design matrix is rank deficient on this grid");
    return F;
  }
}

#endif
