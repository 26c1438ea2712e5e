#ifndef DMA_SIMULATE_HPP
#define DMA_SIMULATE_HPP

#include "dma/estimate.hpp"
#include "dma/kernels.hpp"
#include "dma/types.hpp"

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dma
{
  struct SweepConfig
  {
    std::vector<CovKernel<double>> kernels;
    std::vector<RegressionBasis<double>> models;
    VecX<double> grid;
    std::vector<Index> m_values = {0, 1, 2, 3, 4, 5, -1};   // -1 means n-1
    double jitter = 0.0;
    double variance_scale = 1.0;
  };

  struct SweepRecord
  {
    Index kernel_index = 0;
    Index model_index = 0;
    Index m = 0;                    // resolved (n-1 expanded)
    double det = 0.0;
    double trace = 0.0;
    std::string status = "ok";      // error kind when the record failed
  };

  struct CellSummary
  {
    Index kernel_index = 0;
    Index model_index = 0;
    double psi_det = 0.0;           // det(D_ols) / det(D_blue)
    double psi_tr = 0.0;
    std::string status = "ok";
  };

  struct SweepResult
  {
    SweepConfig config;
    std::vector<SweepRecord> records;      // cell-major, m in config order
    std::vector<CellSummary> summaries;    // kernel-major by model
    std::string config_hash;
    std::chrono::system_clock::time_point started;   // never serialized:
    std::chrono::system_clock::time_point finished;  // outputs stay byte-stable
  };

  // Analytic dispersion sweep over every (kernel, model, m) cell. Cells are
  // independent; failures are recorded per cell and never abort the sweep.
  SweepResult run_sweep(const SweepConfig& config, int jobs = 1);

  std::pair<double, double> efficiency_ratio(const MatX<double>& D_ols,
                                             const MatX<double>& D_blue);

  struct ProfileEntry
  {
    Index kernel_index = 0;
    Index model_index = 0;
    Index first_m = -1;             // least m with det within tol of BLUE
    bool converged = false;
  };

  // Requires the sweep to contain the m = n-1 reference row for each cell.
  std::vector<ProfileEntry> convergence_profile(const SweepResult& result,
                                                double tol = 0.01);

  struct McReport
  {
    CovKernel<double> kernel;
    RegressionBasis<double> model;
    WeightSpec weight;
    Index samples = 0;
    std::uint64_t seed = 0;
    VecX<double> beta;
    MatX<double> analytic;
    MatX<double> empirical;
    VecX<double> mean_bias;
    double trace_analytic = 0.0;
    double trace_empirical = 0.0;
    double rel_trace_dev = 0.0;
    double max_bias_over_se = 0.0;  // worst |mean bias| / (analytic se of the mean)
    std::string status = "ok";
  };

  // Draws Z = F^T beta + noise with the exact covariance, estimates with the
  // requested weight, and compares the empirical estimator covariance with
  // the analytic dispersion matrix.
  McReport monte_carlo_validate(const CovKernel<double>& kernel,
                                const RegressionBasis<double>& model,
                                const VecX<double>& grid,
                                const WeightSpec& weight,
                                Index samples, std::uint64_t seed,
                                const VecX<double>& beta,
                                double jitter = 0.0, double variance_scale = 1.0);

  // Per-cell seed stream: one splitmix64 step of master + index, so sample
  // runs are reproducible regardless of how cells are scheduled.
  std::uint64_t cell_seed(std::uint64_t master, std::uint64_t cell_index);

  // CSV serializations (no timestamps: reruns must be byte-identical).
  std::vector<std::string> sweep_csv_lines(const SweepResult& result);
  std::vector<std::pair<std::string, std::vector<std::string>>>
  curve_files(const SweepResult& result);
  std::vector<std::string> profile_csv_lines(const SweepResult& result, double tol);
  std::vector<std::string> mc_csv_lines(const std::vector<McReport>& reports);
}

#endif
