#ifndef DMA_TYPES_HPP
#define DMA_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dma
{
  using Index = Eigen::Index;

  template <typename Scalar>
  using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  template <typename Scalar>
  using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  class Error : public std::runtime_error
  {
  public:
    Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

  private:
    std::string kind_;
  };

  struct NotPositiveDefinite : Error
  {
    explicit NotPositiveDefinite(const std::string& what)
      : Error("not_positive_definite", what) {}
  };
  struct RankDeficient : Error
  {
    explicit RankDeficient(const std::string& what)
      : Error("rank_deficient", what) {}
  };
  struct SingularSubmatrix : Error
  {
    explicit SingularSubmatrix(const std::string& what)
      : Error("singular_submatrix", what) {}
  };
  struct NonPositiveInnovation : Error
  {
    explicit NonPositiveInnovation(const std::string& what)
      : Error("non_positive_innovation", what) {}
  };
  struct InvalidConnectivity : Error
  {
    explicit InvalidConnectivity(const std::string& what)
      : Error("invalid_connectivity", what) {}
  };
  struct ConfigError : Error
  {
    explicit ConfigError(const std::string& what)
      : Error("config_error", what) {}
  };
  struct IoError : Error
  {
    explicit IoError(const std::string& what)
      : Error("io_error", what) {}
  };

  // Symmetric band storage: entry (i, j) with 0 <= j - i <= half_bandwidth
  // lives at diag(j - i)[i]; everything further out is zero by representation.
  template <typename Scalar>
  class BandedMatrix
  {
  public:
    BandedMatrix() = default;
    BandedMatrix(Index n, Index half_bandwidth)
      : n_(n), m_(half_bandwidth),
        diags_(static_cast<std::size_t>(half_bandwidth) + 1)
    {
      for (Index d = 0; d <= m_; ++d)
        diags_[static_cast<std::size_t>(d)] = VecX<Scalar>::Zero(n_ - d);
    }

    Index order() const noexcept { return n_; }
    Index half_bandwidth() const noexcept { return m_; }

    Scalar coeff(Index i, Index j) const
    {
      Index d = j >= i ? j - i : i - j;
      if (d > m_)
        return Scalar(0);
      return diags_[static_cast<std::size_t>(d)][j >= i ? i : j];
    }

    Scalar& upper_ref(Index i, Index j)  // requires i <= j <= i + m
    {
      return diags_[static_cast<std::size_t>(j - i)][i];
    }

    MatX<Scalar> to_dense() const
    {
      MatX<Scalar> full = MatX<Scalar>::Zero(n_, n_);
      for (Index d = 0; d <= m_; ++d)
        for (Index i = 0; i + d < n_; ++i)
        {
          full(i, i + d) = diags_[static_cast<std::size_t>(d)][i];
          full(i + d, i) = diags_[static_cast<std::size_t>(d)][i];
        }
      return full;
    }

    VecX<Scalar> apply(const VecX<Scalar>& x) const
    {
      VecX<Scalar> y = VecX<Scalar>::Zero(n_);
      for (Index d = 0; d <= m_; ++d)
        for (Index i = 0; i + d < n_; ++i)
        {
          const Scalar v = diags_[static_cast<std::size_t>(d)][i];
          y[i] += v * x[i + d];
          if (d > 0)
            y[i + d] += v * x[i];
        }
      return y;
    }

  private:
    Index n_ = 0;
    Index m_ = 0;
    std::vector<VecX<Scalar>> diags_;
  };

  // Gamma/alpha representation of the band-completed covariance: gammas[i]
  // are the regression coefficients of point i+1 on its min(i+1, m)
  // predecessors, alphas[i] the innovation variances. Together with the
  // retained band this is the whole m-connected model.
  template <typename Scalar>
  struct MarkovFactor
  {
    Index n = 0;
    Index m = 0;
    VecX<Scalar> alphas;                  // n entries, all > 0
    std::vector<VecX<Scalar>> gammas;     // n - 1 vectors, gammas[i] has min(i+1, m) entries
    BandedMatrix<Scalar> band;            // in-band entries of the matrix being factored
  };
}

#endif
