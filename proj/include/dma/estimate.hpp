#ifndef DMA_ESTIMATE_HPP
#define DMA_ESTIMATE_HPP

#include "dma/markov.hpp"
#include "dma/types.hpp"

#include <sstream>
#include <string>

namespace dma
{
  // Weight matrix choices for the generalized least squares estimator:
  // identity is ordinary LSE, the inverse diagonal is weighted LSE, the full
  // inverse is BLUE, and the banded Markov inverse interpolates between the
  // last two as m runs from 0 to n-1.
  struct WeightSpec
  {
    enum class Kind
    {
      Identity,
      DiagonalOfK,
      FullInverse,
      MarkovApprox
    };

    Kind kind = Kind::Identity;
    Index m = 0;   // MarkovApprox only

    static WeightSpec identity() { return {Kind::Identity, 0}; }
    static WeightSpec diagonal_of_k() { return {Kind::DiagonalOfK, 0}; }
    static WeightSpec full_inverse() { return {Kind::FullInverse, 0}; }
    static WeightSpec markov(Index m) { return {Kind::MarkovApprox, m}; }

    std::string name() const
    {
      switch (kind)
      {
        case Kind::Identity:     return "identity";
        case Kind::DiagonalOfK:  return "diagonal";
        case Kind::FullInverse:  return "full_inverse";
        case Kind::MarkovApprox:
        {
          std::ostringstream s;
          s << "markov:" << m;
          return s.str();
        }
      }
      return "unknown";
    }
  };

  // G = W F^T without ever forming a dense W: n x p, one column per basis
  // function.
  template <typename Scalar>
  MatX<Scalar> weighted_design(const MatX<Scalar>& F, const MatX<Scalar>& K,
                               const WeightSpec& weight)
  {
    switch (weight.kind)
    {
      case WeightSpec::Kind::Identity:
        return F.transpose();
      case WeightSpec::Kind::DiagonalOfK:
        return K.diagonal().cwiseInverse().asDiagonal() * F.transpose();
      case WeightSpec::Kind::FullInverse:
      {
        Eigen::LLT<MatX<Scalar>> llt(K);
        if (llt.info() != Eigen::Success)
          throw NotPositiveDefinite("covariance matrix is not positive definite");
        return llt.solve(F.transpose());
      }
      case WeightSpec::Kind::MarkovApprox:
      {
        const MarkovFactor<Scalar> f = markov_factor(K, weight.m);
        return apply_precision(f, MatX<Scalar>(F.transpose()));
      }
    }
    throw ConfigError("unknown weight kind");
  }

  namespace detail
  {
    template <typename Scalar>
    Eigen::LLT<MatX<Scalar>> normal_matrix_llt(const MatX<Scalar>& F, const MatX<Scalar>& G)
    {
      MatX<Scalar> M = F * G;
      M = ((M + M.transpose()) / Scalar(2)).eval();
      Eigen::LLT<MatX<Scalar>> llt(M);
      if (llt.info() != Eigen::Success)
        throw RankDeficient("normal matrix F W F^T is not positive definite");
      return llt;
    }
  }

  // B = [F W F^T]^{-1} F W Z
  template <typename Scalar>
  VecX<Scalar> glse(const MatX<Scalar>& F, const MatX<Scalar>& K,
                    const WeightSpec& weight, const VecX<Scalar>& Z)
  {
    if (Z.size() != F.cols())
      throw ConfigError("measurement vector length does not match the design matrix");
    const MatX<Scalar> G = weighted_design(F, K, weight);
    auto llt = detail::normal_matrix_llt(F, G);
    return llt.solve(G.transpose() * Z);
  }

  // D = M^{-1} (G^T K_true G) M^{-1} with M = F W F^T and G = W F^T: the
  // dispersion of the weighted estimator under the true covariance. With the
  // full-inverse weight this collapses to (F K^{-1} F^T)^{-1}.
  template <typename Scalar>
  MatX<Scalar> dispersion(const MatX<Scalar>& F, const WeightSpec& weight,
                          const MatX<Scalar>& K_true)
  {
    const MatX<Scalar> G = weighted_design(F, K_true, weight);
    auto llt = detail::normal_matrix_llt(F, G);
    MatX<Scalar> S = G.transpose() * K_true * G;
    S = ((S + S.transpose()) / Scalar(2)).eval();
    MatX<Scalar> D = llt.solve(MatX<Scalar>(llt.solve(S).transpose()));
    return ((D + D.transpose()) / Scalar(2)).eval();
  }

  template <typename Scalar>
  struct Functionals
  {
    Scalar det = Scalar(0);
    Scalar trace = Scalar(0);
  };

  template <typename Scalar>
  Functionals<Scalar> functionals(const MatX<Scalar>& D)
  {
    return {D.determinant(), D.trace()};
  }

  template <typename Scalar>
  struct EstimateResult
  {
    VecX<Scalar> coefficients;
    MatX<Scalar> dispersion;
    Scalar det = Scalar(0);
    Scalar trace = Scalar(0);
  };

  template <typename Scalar>
  EstimateResult<Scalar> estimate(const MatX<Scalar>& F, const MatX<Scalar>& K,
                                  const WeightSpec& weight, const VecX<Scalar>& Z)
  {
    EstimateResult<Scalar> r;
    r.coefficients = glse(F, K, weight, Z);
    r.dispersion = dispersion(F, weight, K);
    const auto fn = functionals(r.dispersion);
    r.det = fn.det;
    r.trace = fn.trace;
    return r;
  }
}

#endif
