#ifndef DMA_TEST_HELPERS_HPP
#define DMA_TEST_HELPERS_HPP

#include "dma/covariance.hpp"
#include "dma/kernels.hpp"
#include "dma/types.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace dma::test
{
  // Random correlation-like PD matrix: Gram matrix of random vectors plus a
  // diagonal shift, rescaled to unit diagonal. Well conditioned by design.
  inline MatX<double> random_pd_matrix(Index n, std::mt19937_64& rng)
  {
    std::normal_distribution<double> normal(0.0, 1.0);
    MatX<double> A(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        A(i, j) = normal(rng);
    MatX<double> K = A * A.transpose() / double(n) + MatX<double>::Identity(n, n);
    VecX<double> s = K.diagonal().cwiseSqrt().cwiseInverse();
    return s.asDiagonal() * K * s.asDiagonal();
  }

  // Strictly increasing random grid with spacing bounded away from zero so
  // window solves stay far from the singularity cutoff.
  inline VecX<double> random_grid(Index n, std::mt19937_64& rng)
  {
    std::uniform_real_distribution<double> gap(0.05, 0.4);
    VecX<double> t(n);
    double pos = 0.0;
    for (Index i = 0; i < n; ++i)
    {
      t[i] = pos;
      pos += gap(rng);
    }
    return t;
  }

  // Representative members of the three studied covariance families, chosen
  // so every matrix up to n = 32 on the default spacing stays numerically PD.
  inline std::vector<CovKernel<double>> representative_kernels()
  {
    return {
      {KernelFamily::ExpAbsCos, 1.0, 0.0},
      {KernelFamily::ExpAbsCos, 1.0, 10.0},
      {KernelFamily::ExpQuad, 3.0, 0.0},
      {KernelFamily::ExpQuad, 50.0, 0.0},
      {KernelFamily::ExpQuadCos, 3.0, 20.0},
      {KernelFamily::ExpQuadCos, 50.0, 50.0},
    };
  }

  inline VecX<double> spaced_grid(Index n, double h = 0.21)
  {
    VecX<double> t(n);
    for (Index i = 0; i < n; ++i)
      t[i] = h * double(i);
    return t;
  }

  inline double max_abs(const MatX<double>& M)
  {
    return M.cwiseAbs().maxCoeff();
  }
}

#endif
