#include "dma/simulate.hpp"

#include "dma/covariance.hpp"
#include "dma/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace dma
{
  namespace
  {
    std::string kernel_params(const CovKernel<double>& k)
    {
      std::string s = "alpha1=" + io::format_double(k.alpha1);
      if (k.family != KernelFamily::ExpQuad)
        s += ";alpha2=" + io::format_double(k.alpha2);
      return s;
    }

    std::string sanitize(std::string s)
    {
      for (char& c : s)
        if (c == '.')
          c = 'p';
      return s;
    }

    std::string curve_file_name(const CovKernel<double>& k, const RegressionBasis<double>& b)
    {
      std::string name = "curve_" + kernel_family_name(k.family) +
                         "_a1_" + sanitize(io::format_double(k.alpha1));
      if (k.family != KernelFamily::ExpQuad)
        name += "_a2_" + sanitize(io::format_double(k.alpha2));
      return name + "_" + basis_name(b) + ".csv";
    }

    struct CellOutput
    {
      std::vector<SweepRecord> records;
      CellSummary summary;
    };

    CellOutput run_cell(const SweepConfig& config, Index ki, Index mi)
    {
      const Index n = config.grid.size();
      CellOutput out;
      out.summary.kernel_index = ki;
      out.summary.model_index = mi;

      auto fail_all = [&](const std::string& kind) {
        out.records.clear();
        for (Index m : config.m_values)
        {
          SweepRecord r;
          r.kernel_index = ki;
          r.model_index = mi;
          r.m = m < 0 ? n - 1 : m;
          r.status = kind;
          out.records.push_back(r);
        }
        out.summary.status = kind;
      };

      MatX<double> K, F;
      try
      {
        const CovOptions<double> opts{config.jitter, config.variance_scale};
        K = build_cov_matrix(config.kernels[static_cast<std::size_t>(ki)], config.grid, opts);
        F = build_design_matrix(config.models[static_cast<std::size_t>(mi)], config.grid);
      }
      catch (const Error& e)
      {
        fail_all(e.kind());
        return out;
      }

      for (Index m : config.m_values)
      {
        SweepRecord r;
        r.kernel_index = ki;
        r.model_index = mi;
        r.m = m < 0 ? n - 1 : m;
        try
        {
          const MatX<double> D = dispersion(F, WeightSpec::markov(r.m), K);
          const auto fn = functionals(D);
          r.det = fn.det;
          r.trace = fn.trace;
        }
        catch (const Error& e)
        {
          r.status = e.kind();
        }
        out.records.push_back(r);
      }

      try
      {
        const MatX<double> D_ols = dispersion(F, WeightSpec::identity(), K);
        const MatX<double> D_blue = dispersion(F, WeightSpec::full_inverse(), K);
        const auto [psi_det, psi_tr] = efficiency_ratio(D_ols, D_blue);
        out.summary.psi_det = psi_det;
        out.summary.psi_tr = psi_tr;
      }
      catch (const Error& e)
      {
        out.summary.status = e.kind();
      }
      return out;
    }
  }

  SweepResult run_sweep(const SweepConfig& config, int jobs)
  {
    if (config.kernels.empty() || config.models.empty())
      throw ConfigError("sweep needs at least one kernel and one model");
    validate_grid(config.grid);
    const Index n = config.grid.size();
    for (Index m : config.m_values)
      if (m > n - 1)
        throw InvalidConnectivity("sweep m value exceeds n-1");

    SweepResult result;
    result.config = config;
    result.started = std::chrono::system_clock::now();

    const Index cells = static_cast<Index>(config.kernels.size() * config.models.size());
    std::vector<CellOutput> outputs(static_cast<std::size_t>(cells));

    auto worker = [&](std::atomic<Index>& next) {
      for (Index c = next.fetch_add(1); c < cells; c = next.fetch_add(1))
      {
        const Index ki = c / static_cast<Index>(config.models.size());
        const Index mi = c % static_cast<Index>(config.models.size());
        outputs[static_cast<std::size_t>(c)] = run_cell(config, ki, mi);
      }
    };

    std::atomic<Index> next{0};
    const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(cells)));
    if (threads == 1)
      worker(next);
    else
    {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(threads));
      for (int j = 0; j < threads; ++j)
        pool.emplace_back([&] { worker(next); });
      for (auto& t : pool)
        t.join();
    }

    // aggregation preserves config ordering no matter the scheduling
    for (auto& cell : outputs)
    {
      result.records.insert(result.records.end(), cell.records.begin(), cell.records.end());
      result.summaries.push_back(cell.summary);
    }
    result.finished = std::chrono::system_clock::now();
    return result;
  }

  std::pair<double, double> efficiency_ratio(const MatX<double>& D_ols,
                                             const MatX<double>& D_blue)
  {
    const auto ols = functionals(D_ols);
    const auto blue = functionals(D_blue);
    return {ols.det / blue.det, ols.trace / blue.trace};
  }

  std::vector<ProfileEntry> convergence_profile(const SweepResult& result, double tol)
  {
    const Index n = result.config.grid.size();
    std::vector<ProfileEntry> profile;
    for (const auto& summary : result.summaries)
    {
      ProfileEntry entry;
      entry.kernel_index = summary.kernel_index;
      entry.model_index = summary.model_index;

      double det_blue = 0.0;
      bool have_blue = false;
      for (const auto& r : result.records)
        if (r.kernel_index == summary.kernel_index && r.model_index == summary.model_index &&
            r.m == n - 1 && r.status == "ok")
        {
          det_blue = r.det;
          have_blue = true;
        }
      if (!have_blue)
        throw ConfigError("convergence profile needs the m = n-1 reference row in the sweep");

      std::vector<std::pair<Index, double>> dets;
      for (const auto& r : result.records)
        if (r.kernel_index == summary.kernel_index && r.model_index == summary.model_index &&
            r.status == "ok")
          dets.emplace_back(r.m, r.det);
      std::sort(dets.begin(), dets.end());
      for (const auto& [m, det] : dets)
        if (std::abs(det - det_blue) / det_blue <= tol)
        {
          entry.first_m = m;
          entry.converged = true;
          break;
        }
      profile.push_back(entry);
    }
    return profile;
  }

  std::uint64_t cell_seed(std::uint64_t master, std::uint64_t cell_index)
  {
    std::uint64_t z = master + (cell_index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  McReport monte_carlo_validate(const CovKernel<double>& kernel,
                                const RegressionBasis<double>& model,
                                const VecX<double>& grid,
                                const WeightSpec& weight,
                                Index samples, std::uint64_t seed,
                                const VecX<double>& beta,
                                double jitter, double variance_scale)
  {
    if (samples < 1000)
      throw ConfigError("monte carlo runs need at least 1000 samples");

    McReport report;
    report.kernel = kernel;
    report.model = model;
    report.weight = weight;
    report.samples = samples;
    report.seed = seed;

    const CovOptions<double> opts{jitter, variance_scale};
    const MatX<double> K = build_cov_matrix(kernel, grid, opts);
    const MatX<double> F = build_design_matrix(model, grid);
    const Index n = grid.size();
    const Index p = F.rows();

    if (beta.size() != 0 && beta.size() != p)
      throw ConfigError("beta length does not match the number of basis functions");
    report.beta = beta.size() == p ? beta : VecX<double>(VecX<double>::Ones(p));

    report.analytic = dispersion(F, weight, K);
    report.trace_analytic = report.analytic.trace();

    Eigen::LLT<MatX<double>> llt(K);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("covariance matrix is not positive definite");
    const MatX<double> L = llt.matrixL();

    // the estimator is linear, so fold the solve into a single p x n map
    const MatX<double> G = weighted_design(F, K, weight);
    auto normal_llt = detail::normal_matrix_llt(F, G);
    const MatX<double> estimator = normal_llt.solve(MatX<double>(G.transpose()));

    std::mt19937_64 engine(seed);
    std::normal_distribution<double> unit_normal(0.0, 1.0);

    const VecX<double> trend = F.transpose() * report.beta;
    VecX<double> xi(n);
    VecX<double> sum = VecX<double>::Zero(p);
    MatX<double> sum_outer = MatX<double>::Zero(p, p);
    for (Index s = 0; s < samples; ++s)
    {
      for (Index i = 0; i < n; ++i)
        xi[i] = unit_normal(engine);
      const VecX<double> Z = trend + L * xi;
      const VecX<double> b = estimator * Z;
      sum += b;
      sum_outer += b * b.transpose();
    }

    const VecX<double> mean = sum / double(samples);
    report.empirical =
      (sum_outer - double(samples) * mean * mean.transpose()) / double(samples - 1);
    report.trace_empirical = report.empirical.trace();
    report.rel_trace_dev =
      std::abs(report.trace_empirical - report.trace_analytic) / report.trace_analytic;
    report.mean_bias = mean - report.beta;
    report.max_bias_over_se = 0.0;
    for (Index j = 0; j < p; ++j)
    {
      const double se = std::sqrt(report.analytic(j, j) / double(samples));
      report.max_bias_over_se =
        std::max(report.max_bias_over_se, std::abs(report.mean_bias[j]) / se);
    }
    return report;
  }

  std::vector<std::string> sweep_csv_lines(const SweepResult& result)
  {
    std::vector<std::string> lines;
    lines.push_back("kernel,params,model,m,det,trace,psi_ratio_det,psi_ratio_tr,status");
    for (const auto& r : result.records)
    {
      const auto& kernel = result.config.kernels[static_cast<std::size_t>(r.kernel_index)];
      const auto& model = result.config.models[static_cast<std::size_t>(r.model_index)];
      const auto& summary = result.summaries[static_cast<std::size_t>(
        r.kernel_index * static_cast<Index>(result.config.models.size()) + r.model_index)];
      std::string line = kernel_family_name(kernel.family) + ',' + kernel_params(kernel) +
                         ',' + basis_name(model) + ',' + std::to_string(r.m) + ',';
      if (r.status == "ok")
        line += io::format_double(r.det) + ',' + io::format_double(r.trace);
      else
        line += ",";
      line += ',';
      if (summary.status == "ok")
        line += io::format_double(summary.psi_det) + ',' + io::format_double(summary.psi_tr);
      else
        line += ",";
      line += ',' + (r.status == "ok" ? summary.status : r.status);
      lines.push_back(std::move(line));
    }
    return lines;
  }

  std::vector<std::pair<std::string, std::vector<std::string>>>
  curve_files(const SweepResult& result)
  {
    std::vector<std::pair<std::string, std::vector<std::string>>> files;
    for (const auto& summary : result.summaries)
    {
      const auto& kernel = result.config.kernels[static_cast<std::size_t>(summary.kernel_index)];
      const auto& model = result.config.models[static_cast<std::size_t>(summary.model_index)];
      std::vector<std::string> lines;
      lines.push_back("m,det");
      for (const auto& r : result.records)
        if (r.kernel_index == summary.kernel_index && r.model_index == summary.model_index &&
            r.status == "ok")
          lines.push_back(std::to_string(r.m) + ',' + io::format_double(r.det));
      files.emplace_back(curve_file_name(kernel, model), std::move(lines));
    }
    return files;
  }

  std::vector<std::string> profile_csv_lines(const SweepResult& result, double tol)
  {
    const auto profile = convergence_profile(result, tol);
    std::vector<std::string> lines;
    lines.push_back("kernel,params,model,first_m,converged");
    for (const auto& entry : profile)
    {
      const auto& kernel = result.config.kernels[static_cast<std::size_t>(entry.kernel_index)];
      const auto& model = result.config.models[static_cast<std::size_t>(entry.model_index)];
      lines.push_back(kernel_family_name(kernel.family) + ',' + kernel_params(kernel) + ',' +
                      basis_name(model) + ',' +
                      (entry.converged ? std::to_string(entry.first_m) : std::string()) + ',' +
                      (entry.converged ? "yes" : "no"));
    }
    return lines;
  }

  std::vector<std::string> mc_csv_lines(const std::vector<McReport>& reports)
  {
    std::vector<std::string> lines;
    lines.push_back("kernel,params,model,weight,samples,seed,trace_analytic,trace_empirical,"
                    "rel_trace_dev,max_bias_over_se,status");
    for (const auto& r : reports)
    {
      std::ostringstream line;
      line << kernel_family_name(r.kernel.family) << ',' << kernel_params(r.kernel) << ','
           << basis_name(r.model) << ',' << r.weight.name() << ',' << r.samples << ','
           << r.seed << ',';
      if (r.status == "ok")
        line << io::format_double(r.trace_analytic) << ',' << io::format_double(r.trace_empirical)
             << ',' << io::format_double(r.rel_trace_dev) << ','
             << io::format_double(r.max_bias_over_se);
      else
        line << ",,,";
      line << ',' << r.status;
      lines.push_back(line.str());
    }
    return lines;
  }
}
