#ifndef DMA_CONFIG_HPP
#define DMA_CONFIG_HPP

#include "dma/estimate.hpp"
#include "dma/kernels.hpp"
#include "dma/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dma
{
  struct GridConfig
  {
    Index n = 16;
    double lo = 0.0;
    double hi = 3.15;
    std::vector<double> points;   // non-empty means an explicit grid

    VecX<double> build() const;
  };

  struct KernelConfig
  {
    KernelFamily family = KernelFamily::ExpQuad;
    std::vector<double> alpha1;
    std::vector<double> alpha2;
    std::vector<std::pair<double, double>> pairs;   // overrides the cross product

    std::vector<CovKernel<double>> cells() const;
  };

  struct McConfig
  {
    Index samples = 10000;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::vector<double> beta;
  };

  // One schema for every subcommand; each command validates the subset of
  // fields it actually needs.
  struct RunConfig
  {
    int version = 1;
    KernelConfig kernel;
    bool has_kernel = false;
    std::vector<RegressionBasis<double>> models;
    GridConfig grid;
    WeightSpec weight = WeightSpec::full_inverse();
    bool has_weight = false;
    Index m = 0;                      // connectivity for approx/inverse
    bool has_m = false;
    std::vector<Index> m_values = {0, 1, 2, 3, 4, 5, -1};  // -1 means n-1
    double profile_tol = 0.01;
    McConfig mc;
    bool has_mc = false;
    double jitter = 0.0;
    double variance_scale = 1.0;
    std::string matrix_file;          // alternative input to kernel+grid
    std::string measurements_file;
    std::string out_dir = "out";
  };

  RunConfig parse_config(const std::string& text, const std::string& origin);
  RunConfig load_config(const std::string& path);

  // FNV-1a of the canonical serialized form (defaults filled in, keys
  // sorted), so logically identical configs hash identically.
  std::string config_hash(const RunConfig& cfg);
}

#endif
