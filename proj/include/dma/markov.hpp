#ifndef DMA_MARKOV_HPP
#define DMA_MARKOV_HPP

#include "dma/types.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace dma
{
  // Numerical guardrails: a window solve whose reciprocal condition falls
  // below rcond_cutoff is treated as singular rather than silently inverted,
  // and an innovation variance below innovation_cutoff * k_ii signals that
  // the band data is not positive definite.
  inline constexpr double rcond_cutoff = 1e-14;
  inline constexpr double innovation_cutoff = 1e-12;

  template <typename Scalar>
  void check_connectivity(Index n, Index m)
  {
    if (m < 0 || m > n - 1)
    {
      std::ostringstream msg;
      msg << "connectivity m=" << m << " must lie in [0, n-1] with n=" << n;
      throw InvalidConnectivity(msg.str());
    }
  }

  // gammas[i] solves K(win,win) g = K(win, i+1) with win = the min(i+1, m)
  // indices ending at i; only band entries |r - c| <= m of K are ever read.
  template <typename Scalar>
  std::vector<VecX<Scalar>> compute_gamma(const MatX<Scalar>& K, Index m)
  {
    const Index n = K.rows();
    check_connectivity<Scalar>(n, m);

    std::vector<VecX<Scalar>> gammas(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
    for (Index j = 1; j < n; ++j)
    {
      const Index w = std::min(j, m);
      if (w == 0)
      {
        gammas[static_cast<std::size_t>(j - 1)] = VecX<Scalar>(0);
        continue;
      }
      const Index lo = j - w;
      MatX<Scalar> window = K.block(lo, lo, w, w);
      VecX<Scalar> rhs = K.block(lo, j, w, 1);
      Eigen::LLT<MatX<Scalar>> llt(window);
      if (llt.info() != Eigen::Success || llt.rcond() < Scalar(rcond_cutoff))
      {
        std::ostringstream msg;
        msg << "window [" << lo << "," << j - 1 << "] is numerically singular"
            << " (rcond " << llt.rcond() << ")";
        throw SingularSubmatrix(msg.str());
      }
      gammas[static_cast<std::size_t>(j - 1)] = llt.solve(rhs);
    }
    return gammas;
  }

  // alpha[0] = k_00; alpha[j] = k_jj - k(j, win) . gammas[j-1]. Window sizes
  // are taken from the gamma vectors themselves, so any consistent set works.
  template <typename Scalar>
  VecX<Scalar> compute_alphas(const MatX<Scalar>& K, const std::vector<VecX<Scalar>>& gammas)
  {
    const Index n = K.rows();
    VecX<Scalar> alphas(n);
    if (n == 0)
      return alphas;
    alphas[0] = K(0, 0);
    for (Index j = 1; j < n; ++j)
    {
      const auto& g = gammas[static_cast<std::size_t>(j - 1)];
      const Index w = g.size();
      Scalar a = K(j, j);
      if (w > 0)
        a -= (K.block(j, j - w, 1, w) * g).value();
      if (!(a > Scalar(innovation_cutoff) * K(j, j)))
      {
        std::ostringstream msg;
        msg << "innovation variance " << a << " at index " << j
            << " is not positive relative to the diagonal " << K(j, j);
        throw NonPositiveInnovation(msg.str());
      }
      alphas[j] = a;
    }
    return alphas;
  }

  template <typename Scalar>
  MarkovFactor<Scalar> markov_factor(const MatX<Scalar>& K, Index m)
  {
    const Index n = K.rows();
    check_connectivity<Scalar>(n, m);
    MarkovFactor<Scalar> f;
    f.n = n;
    f.m = m;
    f.gammas = compute_gamma(K, m);
    f.alphas = compute_alphas(K, f.gammas);
    f.band = BandedMatrix<Scalar>(n, m);
    for (Index i = 0; i < n; ++i)
      for (Index j = i; j <= std::min(n - 1, i + m); ++j)
        f.band.upper_ref(i, j) = K(i, j);
    return f;
  }

  // Band completion: keep |i - j| <= m bit-exact, fill the rest column by
  // column with k_ij = sum_l gammas[j-1][l] k(i, j-m+l). Every entry read is
  // at band distance < j - i, hence already final.
  template <typename Scalar>
  MatX<Scalar> dma_extend(const MatX<Scalar>& K, Index m)
  {
    const Index n = K.rows();
    check_connectivity<Scalar>(n, m);
    MatX<Scalar> R = K;
    if (m >= n - 1)
      return R;

    const auto gammas = compute_gamma(K, m);
    for (Index j = m + 1; j < n; ++j)
    {
      const auto& g = gammas[static_cast<std::size_t>(j - 1)];
      for (Index i = 0; i + m < j; ++i)
      {
        Scalar v = Scalar(0);
        for (Index l = 0; l < m; ++l)
          v += g[l] * R(i, j - m + l);
        R(i, j) = v;
        R(j, i) = v;
      }
    }
    return R;
  }

  // Inverse of the band completion, assembled banded from the factorization
  // C = L^T D^{-1} L where row k of the unit lower triangular L carries
  // -gammas[k-1] left of the diagonal and D = diag(alphas).
  template <typename Scalar>
  BandedMatrix<Scalar> banded_inverse(const MarkovFactor<Scalar>& f)
  {
    BandedMatrix<Scalar> C(f.n, f.m);
    for (Index k = 0; k < f.n; ++k)
    {
      if (!(f.alphas[k] > Scalar(0)))
        throw NonPositiveInnovation("factor has a non-positive innovation variance");
      const Index w = k == 0 ? 0 : f.gammas[static_cast<std::size_t>(k - 1)].size();
      const Scalar inv_a = Scalar(1) / f.alphas[k];
      // row k of L is supported on [k-w, k]: coefficients (-g[0..w-1], 1)
      for (Index a = 0; a <= w; ++a)
      {
        const Scalar ca = a == w ? Scalar(1) : -f.gammas[static_cast<std::size_t>(k - 1)][a];
        for (Index b = a; b <= w; ++b)
        {
          const Scalar cb = b == w ? Scalar(1) : -f.gammas[static_cast<std::size_t>(k - 1)][b];
          C.upper_ref(k - w + a, k - w + b) += ca * cb * inv_a;
        }
      }
    }
    return C;
  }

  // y = (K^m)^{-1} x through the factorization, O(n m) per column and never
  // densified: y = L^T D^{-1} L x.
  template <typename Scalar>
  MatX<Scalar> apply_precision(const MarkovFactor<Scalar>& f, const MatX<Scalar>& X)
  {
    const Index n = f.n;
    MatX<Scalar> Y(n, X.cols());
    VecX<Scalar> u(n);
    for (Index c = 0; c < X.cols(); ++c)
    {
      for (Index k = 0; k < n; ++k)
      {
        Scalar v = X(k, c);
        if (k > 0)
        {
          const auto& g = f.gammas[static_cast<std::size_t>(k - 1)];
          const Index w = g.size();
          for (Index l = 0; l < w; ++l)
            v -= g[l] * X(k - w + l, c);
        }
        u[k] = v / f.alphas[k];
      }
      for (Index k = 0; k < n; ++k)
        Y(k, c) = u[k];
      for (Index k = n - 1; k >= 1; --k)
      {
        const auto& g = f.gammas[static_cast<std::size_t>(k - 1)];
        const Index w = g.size();
        for (Index l = 0; l < w; ++l)
          Y(k - w + l, c) -= g[l] * u[k];
      }
    }
    return Y;
  }

  template <typename Scalar>
  struct MarkovCheck
  {
    bool markov = false;
    Scalar max_violation = Scalar(0);
  };

  // Tests whether K already satisfies the m-connected condition: every
  // out-of-band entry must equal its window prediction from K's own values,
  // relative to sqrt(k_ii k_jj).
  template <typename Scalar>
  MarkovCheck<Scalar> is_markov(const MatX<Scalar>& K, Index m, Scalar tol)
  {
    using std::sqrt;
    const Index n = K.rows();
    check_connectivity<Scalar>(n, m);
    const auto gammas = compute_gamma(K, m);

    MarkovCheck<Scalar> result;
    for (Index j = m + 1; j < n; ++j)
    {
      const auto& g = gammas[static_cast<std::size_t>(j - 1)];
      const Index w = g.size();
      for (Index i = 0; i + m < j; ++i)
      {
        Scalar pred = Scalar(0);
        for (Index l = 0; l < w; ++l)
          pred += g[l] * K(i, j - w + l);
        const Scalar resid = std::abs(K(i, j) - pred) / sqrt(K(i, i) * K(j, j));
        if (resid > result.max_violation)
          result.max_violation = resid;
      }
    }
    result.markov = result.max_violation <= tol;
    return result;
  }

  // Rebuilds the in-band entries from gammas/alphas alone: k_jj = alpha_j +
  // k(j, win) . g and k_ij = sum_l g[l] k(i, win[l]) hold for every i < j,
  // in-band included, because g is the exact window regression.
  template <typename Scalar>
  BandedMatrix<Scalar> band_from_factor(const MarkovFactor<Scalar>& f)
  {
    BandedMatrix<Scalar> band(f.n, f.m);
    if (f.n == 0)
      return band;
    band.upper_ref(0, 0) = f.alphas[0];
    for (Index j = 1; j < f.n; ++j)
    {
      const auto& g = f.gammas[static_cast<std::size_t>(j - 1)];
      const Index w = g.size();
      Scalar diag = f.alphas[j];
      for (Index i = std::max<Index>(0, j - f.m); i < j; ++i)
      {
        Scalar v = Scalar(0);
        for (Index l = 0; l < w; ++l)
          v += g[l] * band.coeff(i, j - w + l);
        band.upper_ref(i, j) = v;
      }
      for (Index l = 0; l < w; ++l)
        diag += g[l] * band.coeff(j - w + l, j);
      band.upper_ref(j, j) = diag;
    }
    return band;
  }

  // m=1 diagnostic: mu[i] = k(i+2,i+2) - g(i)^2 g(i+1)^2 k(i,i), with g the
  // neighbor ratios k(j,j+1)/k(j,j). Exposed for inspection only; the banded
  // inverse never uses it.
  template <typename Scalar>
  VecX<Scalar> markov_mu(const MatX<Scalar>& K)
  {
    const Index n = K.rows();
    if (n < 3)
      return VecX<Scalar>(0);
    VecX<Scalar> g(n - 1);
    for (Index j = 0; j + 1 < n; ++j)
      g[j] = K(j, j + 1) / K(j, j);
    VecX<Scalar> mu(n - 2);
    for (Index i = 0; i + 2 < n; ++i)
      mu[i] = K(i + 2, i + 2) - g[i] * g[i] * g[i + 1] * g[i + 1] * K(i, i);
    return mu;
  }
}

#endif
