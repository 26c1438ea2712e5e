#include "dma/config.hpp"
#include "dma/covariance.hpp"
#include "dma/estimate.hpp"
#include "dma/io.hpp"
#include "dma/markov.hpp"
#include "dma/simulate.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace
{
  struct CommonOpts
  {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool has_seed = false;
    int jobs = 1;
    bool dry_run = false;
    bool quiet = false;
  };

  void add_common(CLI::App* cmd, CommonOpts& opts)
  {
    cmd->add_option("--config", opts.config_path, "config file (JSON)")->required();
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "Monte Carlo seed (overrides config)");
    cmd->add_option("--jobs", opts.jobs, "worker threads for sweeps")
      ->check(CLI::PositiveNumber);
    cmd->add_flag("--dry-run", opts.dry_run, "validate the config and exit");
    cmd->add_flag("--quiet", opts.quiet, "suppress progress output");
  }

  // input paths inside a config are relative to the config file itself
  std::string resolve_path(const std::string& config_path, const std::string& p)
  {
    const fs::path path(p);
    if (path.is_absolute())
      return p;
    return (fs::path(config_path).parent_path() / path).string();
  }

  dma::RunConfig load_effective_config(const CommonOpts& opts)
  {
    dma::RunConfig cfg = dma::load_config(opts.config_path);
    if (!opts.out_dir.empty())
      cfg.out_dir = opts.out_dir;
    if (opts.has_seed)
    {
      cfg.mc.seed = opts.seed;
      cfg.mc.has_seed = true;
    }
    return cfg;
  }

  void say(const CommonOpts& opts, const std::string& line)
  {
    if (!opts.quiet)
      std::cout << line << '\n';
  }

  struct MatrixInput
  {
    dma::MatX<double> K;
    dma::VecX<double> grid;     // empty when the matrix came from a file
    bool has_grid = false;
  };

  MatrixInput resolve_matrix(const dma::RunConfig& cfg, const CommonOpts& opts,
                             bool dry_run_check_only)
  {
    MatrixInput input;
    if (!cfg.matrix_file.empty())
    {
      const std::string path = resolve_path(opts.config_path, cfg.matrix_file);
      if (dry_run_check_only)
      {
        if (!fs::exists(path))
          throw dma::IoError("matrix file '" + path + "' does not exist");
        return input;
      }
      input.K = dma::io::read_matrix_csv(path);
      const double scale = input.K.cwiseAbs().maxCoeff();
      const double asym = (input.K - input.K.transpose().eval()).cwiseAbs().maxCoeff();
      if (scale > 0 && asym > 1e-14 * scale)
        throw dma::ConfigError("matrix file is not symmetric within 1e-14 relative");
      Eigen::LLT<dma::MatX<double>> llt(input.K);
      if (llt.info() != Eigen::Success)
        throw dma::NotPositiveDefinite("input matrix is not positive definite");
      return input;
    }
    if (!cfg.has_kernel)
      throw dma::ConfigError("config needs either a 'kernel' or a 'matrix' input");
    const auto cells = cfg.kernel.cells();
    if (cells.size() != 1)
      throw dma::ConfigError("this command needs exactly one kernel parameter set");
    input.grid = cfg.grid.build();
    input.has_grid = true;
    if (dry_run_check_only)
      return input;
    const dma::CovOptions<double> covopts{cfg.jitter, cfg.variance_scale};
    input.K = dma::build_cov_matrix(cells[0], input.grid, covopts);
    return input;
  }

  dma::Index required_m(const dma::RunConfig& cfg)
  {
    if (!cfg.has_m)
      throw dma::ConfigError("config needs the connectivity field 'm'");
    return cfg.m;
  }

  void ensure_out_dir(const dma::RunConfig& cfg)
  {
    fs::create_directories(cfg.out_dir);
  }

  std::string out_file(const dma::RunConfig& cfg, const std::string& name)
  {
    return (fs::path(cfg.out_dir) / name).string();
  }

  int cmd_approx(const CommonOpts& opts)
  {
    const dma::RunConfig cfg = load_effective_config(opts);
    const std::string hash = dma::config_hash(cfg);
    const dma::Index m = required_m(cfg);
    if (opts.dry_run)
    {
      resolve_matrix(cfg, opts, true);
      say(opts, "dry_run,ok," + hash);
      return 0;
    }
    const MatrixInput input = resolve_matrix(cfg, opts, false);
    const dma::MatX<double> adjoint = dma::dma_extend(input.K, m);
    const dma::MarkovFactor<double> factor = dma::markov_factor(input.K, m);

    ensure_out_dir(cfg);
    const std::vector<std::string> comments = {"config=" + hash};
    dma::io::write_matrix_csv(out_file(cfg, "adjoint.csv"), adjoint, comments);
    dma::io::write_factor_csv(out_file(cfg, "factor.csv"), factor, comments);

    double in_band = 0.0;
    const dma::Index n = input.K.rows();
    for (dma::Index i = 0; i < n; ++i)
      for (dma::Index j = std::max<dma::Index>(0, i - m); j <= std::min(n - 1, i + m); ++j)
        in_band = std::max(in_band, std::abs(adjoint(i, j) - input.K(i, j)));
    const auto check = dma::is_markov(adjoint, m, 1e-8);
    say(opts, "in_band_max_residual," + dma::io::format_double(in_band));
    say(opts, "markov_violation," + dma::io::format_double(check.max_violation));
    say(opts, std::string("markov,") + (check.markov ? "true" : "false"));
    return 0;
  }

  int cmd_inverse(const CommonOpts& opts)
  {
    const dma::RunConfig cfg = load_effective_config(opts);
    const std::string hash = dma::config_hash(cfg);
    const dma::Index m = required_m(cfg);
    if (opts.dry_run)
    {
      resolve_matrix(cfg, opts, true);
      say(opts, "dry_run,ok," + hash);
      return 0;
    }
    const MatrixInput input = resolve_matrix(cfg, opts, false);
    const dma::MarkovFactor<double> factor = dma::markov_factor(input.K, m);
    const dma::BandedMatrix<double> C = dma::banded_inverse(factor);
    const dma::MatX<double> adjoint = dma::dma_extend(input.K, m);
    const double residual =
      (C.to_dense() * adjoint - dma::MatX<double>::Identity(factor.n, factor.n))
        .cwiseAbs()
        .maxCoeff();

    ensure_out_dir(cfg);
    const std::vector<std::string> comments = {"config=" + hash};
    dma::io::write_matrix_csv(out_file(cfg, "inverse.csv"), C.to_dense(), comments);
    dma::io::write_factor_csv(out_file(cfg, "factor.csv"), factor, comments);
    say(opts, "identity_residual," + dma::io::format_double(residual));
    return 0;
  }

  dma::VecX<double> read_measurements(const std::string& path)
  {
    const auto lines = dma::io::read_lines(path);
    std::vector<double> values;
    for (const auto& line : lines)
      if (!line.empty() && line[0] != '#')
        values.push_back(dma::io::parse_double(line));
    dma::VecX<double> Z(static_cast<dma::Index>(values.size()));
    for (dma::Index i = 0; i < Z.size(); ++i)
      Z[i] = values[static_cast<std::size_t>(i)];
    return Z;
  }

  int cmd_estimate(const CommonOpts& opts)
  {
    const dma::RunConfig cfg = load_effective_config(opts);
    const std::string hash = dma::config_hash(cfg);
    if (!cfg.has_weight)
      throw dma::ConfigError("estimate needs a 'weight' entry");
    if (cfg.models.size() != 1)
      throw dma::ConfigError("estimate needs exactly one model");
    if (cfg.measurements_file.empty())
      throw dma::ConfigError("estimate needs a 'measurements' file");
    const std::string zpath = resolve_path(opts.config_path, cfg.measurements_file);
    if (opts.dry_run)
    {
      resolve_matrix(cfg, opts, true);
      if (!fs::exists(zpath))
        throw dma::IoError("measurements file '" + zpath + "' does not exist");
      say(opts, "dry_run,ok," + hash);
      return 0;
    }
    const MatrixInput input = resolve_matrix(cfg, opts, false);
    if (!input.has_grid)
      throw dma::ConfigError("estimate needs a kernel+grid config (the design matrix "
                             "is evaluated on the grid)");
    const dma::VecX<double> Z = read_measurements(zpath);
    if (Z.size() != input.K.rows())
      throw dma::ConfigError("measurements length does not match the grid");
    const dma::MatX<double> F = dma::build_design_matrix(cfg.models[0], input.grid);
    const auto result = dma::estimate(F, input.K, cfg.weight, Z);

    ensure_out_dir(cfg);
    std::vector<std::string> lines;
    lines.push_back("# config=" + hash);
    lines.push_back("weight," + cfg.weight.name());
    lines.push_back("n," + std::to_string(input.K.rows()));
    lines.push_back("p," + std::to_string(F.rows()));
    std::string coef = "coefficients";
    for (dma::Index j = 0; j < result.coefficients.size(); ++j)
      coef += ',' + dma::io::format_double(result.coefficients[j]);
    lines.push_back(coef);
    lines.push_back("det," + dma::io::format_double(result.det));
    lines.push_back("trace," + dma::io::format_double(result.trace));
    dma::io::write_lines(out_file(cfg, "estimate.csv"), lines);
    dma::io::write_matrix_csv(out_file(cfg, "dispersion.csv"), result.dispersion,
                              {"config=" + hash});
    say(opts, "written," + out_file(cfg, "estimate.csv"));
    return 0;
  }

  dma::SweepConfig sweep_config_from(const dma::RunConfig& cfg)
  {
    if (!cfg.has_kernel)
      throw dma::ConfigError("sweep needs a 'kernel' entry");
    if (cfg.models.empty())
      throw dma::ConfigError("sweep needs at least one model");
    dma::SweepConfig sc;
    sc.kernels = cfg.kernel.cells();
    sc.models = cfg.models;
    sc.grid = cfg.grid.build();
    sc.m_values = cfg.m_values;
    sc.jitter = cfg.jitter;
    sc.variance_scale = cfg.variance_scale;
    return sc;
  }

  int cmd_sweep(const CommonOpts& opts)
  {
    const dma::RunConfig cfg = load_effective_config(opts);
    const std::string hash = dma::config_hash(cfg);
    const dma::SweepConfig sc = sweep_config_from(cfg);
    if (opts.dry_run)
    {
      say(opts, "dry_run,ok," + hash);
      return 0;
    }
    dma::SweepResult result = dma::run_sweep(sc, opts.jobs);
    result.config_hash = hash;

    ensure_out_dir(cfg);
    std::vector<std::string> lines = {"# config=" + hash};
    const auto body = dma::sweep_csv_lines(result);
    lines.insert(lines.end(), body.begin(), body.end());
    dma::io::write_lines(out_file(cfg, "sweep.csv"), lines);

    for (const auto& [name, content] : dma::curve_files(result))
    {
      std::vector<std::string> file = {"# config=" + hash};
      file.insert(file.end(), content.begin(), content.end());
      dma::io::write_lines(out_file(cfg, name), file);
    }

    const dma::Index n = sc.grid.size();
    const bool has_reference =
      std::any_of(sc.m_values.begin(), sc.m_values.end(),
                  [n](dma::Index m) { return m == -1 || m == n - 1; });
    if (has_reference)
    {
      std::vector<std::string> file = {"# config=" + hash};
      const auto body2 = dma::profile_csv_lines(result, cfg.profile_tol);
      file.insert(file.end(), body2.begin(), body2.end());
      dma::io::write_lines(out_file(cfg, "profile.csv"), file);
    }
    else
      say(opts, "profile,skipped_no_reference");

    say(opts, "cells," + std::to_string(result.summaries.size()));
    say(opts, "written," + out_file(cfg, "sweep.csv"));
    return 0;
  }

  int cmd_sample(const CommonOpts& opts)
  {
    const dma::RunConfig cfg = load_effective_config(opts);
    const std::string hash = dma::config_hash(cfg);
    if (!cfg.has_mc)
      throw dma::ConfigError("sample needs a 'monte_carlo' entry");
    if (!cfg.mc.has_seed)
      throw dma::ConfigError("sample needs a seed (config monte_carlo.seed or --seed)");
    if (!cfg.has_weight)
      throw dma::ConfigError("sample needs a 'weight' entry");
    const dma::SweepConfig sc = sweep_config_from(cfg);
    if (opts.dry_run)
    {
      say(opts, "dry_run,ok," + hash);
      return 0;
    }

    dma::VecX<double> beta(static_cast<dma::Index>(cfg.mc.beta.size()));
    for (dma::Index i = 0; i < beta.size(); ++i)
      beta[i] = cfg.mc.beta[static_cast<std::size_t>(i)];

    std::vector<dma::McReport> reports;
    std::uint64_t cell_index = 0;
    for (std::size_t ki = 0; ki < sc.kernels.size(); ++ki)
      for (std::size_t mi = 0; mi < sc.models.size(); ++mi, ++cell_index)
      {
        const std::uint64_t seed = dma::cell_seed(cfg.mc.seed, cell_index);
        try
        {
          reports.push_back(dma::monte_carlo_validate(sc.kernels[ki], sc.models[mi], sc.grid,
                                                      cfg.weight, cfg.mc.samples, seed, beta,
                                                      sc.jitter, sc.variance_scale));
        }
        catch (const dma::Error& e)
        {
          dma::McReport failed;
          failed.kernel = sc.kernels[ki];
          failed.model = sc.models[mi];
          failed.weight = cfg.weight;
          failed.samples = cfg.mc.samples;
          failed.seed = seed;
          failed.status = e.kind();
          reports.push_back(failed);
        }
      }

    ensure_out_dir(cfg);
    std::vector<std::string> lines = {"# config=" + hash};
    const auto body = dma::mc_csv_lines(reports);
    lines.insert(lines.end(), body.begin(), body.end());
    dma::io::write_lines(out_file(cfg, "sample.csv"), lines);

    double worst = 0.0;
    for (const auto& r : reports)
      if (r.status == "ok")
        worst = std::max(worst, r.rel_trace_dev);
    say(opts, "worst_rel_trace_dev," + dma::io::format_double(worst));
    say(opts, "written," + out_file(cfg, "sample.csv"));
    return 0;
  }

  int exit_code_for(const dma::Error& e)
  {
    const auto& kind = e.kind();
    if (kind == "config_error" || kind == "io_error" || kind == "invalid_connectivity")
      return 2;
    return 3;
  }
}

int main(int argc, char** argv)
{
  CLI::App app{"discrete Markov approximation of covariance matrices and GLS trend estimation"};
  app.require_subcommand(1);

  CommonOpts approx_opts, inverse_opts, estimate_opts, sweep_opts, sample_opts;
  auto* approx = app.add_subcommand("approx", "band-complete a covariance matrix");
  add_common(approx, approx_opts);
  auto* inverse = app.add_subcommand("inverse", "banded inverse of the band completion");
  add_common(inverse, inverse_opts);
  auto* estimate = app.add_subcommand("estimate", "GLS trend estimate from measurements");
  add_common(estimate, estimate_opts);
  auto* sweep = app.add_subcommand("sweep", "dispersion sweep over kernels, models and m");
  add_common(sweep, sweep_opts);
  auto* sample = app.add_subcommand("sample", "Monte Carlo check of analytic dispersions");
  add_common(sample, sample_opts);

  CLI11_PARSE(app, argc, argv);

  // CLI11 leaves defaulted options untouched, so detect explicit seeds
  approx_opts.has_seed = approx->count("--seed") > 0;
  inverse_opts.has_seed = inverse->count("--seed") > 0;
  estimate_opts.has_seed = estimate->count("--seed") > 0;
  sweep_opts.has_seed = sweep->count("--seed") > 0;
  sample_opts.has_seed = sample->count("--seed") > 0;

  try
  {
    if (approx->parsed())
      return cmd_approx(approx_opts);
    if (inverse->parsed())
      return cmd_inverse(inverse_opts);
    if (estimate->parsed())
      return cmd_estimate(estimate_opts);
    if (sweep->parsed())
      return cmd_sweep(sweep_opts);
    if (sample->parsed())
      return cmd_sample(sample_opts);
  }
  catch (const dma::Error& e)
  {
    std::cerr << "error," << e.kind() << ',' << e.what() << '\n';
    return exit_code_for(e);
  }
  catch (const std::exception& e)
  {
    std::cerr << "error,internal," << e.what() << '\n';
    return 3;
  }
  return 0;
}
