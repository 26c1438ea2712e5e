// End-to-end checks of the dma binary: each case runs the real executable
// (path passed in through the DMA_CLI environment variable) against a config
// written into a scratch directory and inspects exit code, stdout/stderr and
// the produced files.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dma/io.hpp"
#include "dma/types.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;

namespace
{
  const char* cli_path()
  {
    const char* path = std::getenv("DMA_CLI");
    REQUIRE_MESSAGE(path != nullptr, "DMA_CLI must point at the built binary");
    return path;
  }

  struct TempDir
  {
    fs::path root;

    TempDir()
    {
      root = fs::temp_directory_path() /
             ("dma_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(next_id()));
      fs::create_directories(root);
    }

    ~TempDir() { fs::remove_all(root); }

    static int next_id()
    {
      static int id = 0;
      return id++;
    }

    std::string file(const std::string& name) const { return (root / name).string(); }
  };

  void write_text(const std::string& path, const std::string& text)
  {
    std::ofstream out(path);
    REQUIRE(out.good());
    out << text;
  }

  std::string slurp(const std::string& path)
  {
    std::ifstream in(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  }

  std::string quoted(const std::string& s)
  {
    REQUIRE(s.find('\'') == std::string::npos);
    return "'" + s + "'";
  }

  struct CliResult
  {
    int code = -1;
    std::string out;
    std::string err;

    bool out_has(const std::string& line) const
    {
      return out.find(line) != std::string::npos;
    }
  };

  CliResult run_cli(const TempDir& dir, const std::vector<std::string>& args)
  {
    static int call = 0;
    const std::string out_path = dir.file("cli_stdout_" + std::to_string(call));
    const std::string err_path = dir.file("cli_stderr_" + std::to_string(call));
    ++call;

    std::string command = quoted(cli_path());
    for (const auto& arg : args)
      command += ' ' + quoted(arg);
    command += " >" + quoted(out_path) + " 2>" + quoted(err_path);

    const int status = std::system(command.c_str());
    CliResult result;
    result.code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
  }

  // stdout lines are "key,value"; returns the value of the first matching key
  std::string stdout_value(const CliResult& r, const std::string& key)
  {
    std::istringstream in(r.out);
    std::string line;
    while (std::getline(in, line))
      if (line.rfind(key + ",", 0) == 0)
        return line.substr(key.size() + 1);
    FAIL("stdout has no '" << key << "' line:\n" << r.out);
    return {};
  }

  std::string first_line(const std::string& path)
  {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    return line;
  }

  bool is_config_stamp(const std::string& line)
  {
    if (line.rfind("# config=", 0) != 0 || line.size() != 9 + 16)
      return false;
    return std::all_of(line.begin() + 9, line.end(), [](char c) {
      return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
  }
}

TEST_CASE("approx on a matrix file with m = n-1 writes back the input values")
{
  TempDir dir;
  write_text(dir.file("k.csv"), "n,2\n1,0.5\n0.5,1\n");
  write_text(dir.file("cfg.json"),
             "{\"version\":1,\"matrix\":\"k.csv\",\"m\":1,\"out\":\"" + dir.file("out") + "\"}");

  const auto r = run_cli(dir, {"approx", "--config", dir.file("cfg.json")});
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  CHECK(stdout_value(r, "in_band_max_residual") == "0");
  CHECK(stdout_value(r, "markov") == "true");

  const auto adjoint = dma::io::read_matrix_csv(dir.file("out/adjoint.csv"));
  dma::MatX<double> expected(2, 2);
  expected << 1, 0.5, 0.5, 1;
  CHECK((adjoint.array() == expected.array()).all());
  CHECK(is_config_stamp(first_line(dir.file("out/adjoint.csv"))));

  // the factor file is written alongside and reads back as n=2, m=1
  const auto factor = dma::io::read_factor_csv(dir.file("out/factor.csv"));
  CHECK(factor.n == 2);
  CHECK(factor.m == 1);
}

TEST_CASE("approx from a kernel with m = 0 zeroes everything off the diagonal")
{
  TempDir dir;
  write_text(dir.file("cfg.json"),
             "{\"version\":1,"
             "\"kernel\":{\"family\":\"exp_quad\",\"alpha1\":3},"
             "\"grid\":{\"n\":8},\"m\":0,"
             "\"out\":\"" + dir.file("out") + "\"}");

  const auto r = run_cli(dir, {"approx", "--config", dir.file("cfg.json")});
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  CHECK(stdout_value(r, "markov") == "true");

  const auto adjoint = dma::io::read_matrix_csv(dir.file("out/adjoint.csv"));
  REQUIRE(adjoint.rows() == 8);
  double off = 0.0;
  for (dma::Index i = 0; i < 8; ++i)
    for (dma::Index j = 0; j < 8; ++j)
      if (i != j)
        off = std::max(off, std::abs(adjoint(i, j)));
  CHECK(off == 0.0);
  CHECK((adjoint.diagonal().array() == 1.0).all());
}

TEST_CASE("approx reports a small violation for an oscillating kernel at m = 2")
{
  TempDir dir;
  write_text(dir.file("cfg.json"),
             "{\"version\":1,"
             "\"kernel\":{\"family\":\"exp_quad_cos\",\"alpha1\":3,\"alpha2\":10},"
             "\"grid\":{\"n\":16},\"m\":2,"
             "\"out\":\"" + dir.file("out") + "\"}");

  const auto r = run_cli(dir, {"approx", "--config", dir.file("cfg.json")});
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  // the command checks its own output: the extension is Markov by construction
  CHECK(dma::io::parse_double(stdout_value(r, "markov_violation")) <= 1e-8);
  CHECK(stdout_value(r, "markov") == "true");
}

TEST_CASE("inverse writes a banded inverse with a tiny identity residual")
{
  TempDir dir;
  write_text(dir.file("cfg.json"),
             "{\"version\":1,"
             "\"kernel\":{\"family\":\"exp_abs_cos\",\"alpha1\":1,\"alpha2\":10},"
             "\"grid\":{\"n\":8},\"m\":2,"
             "\"out\":\"" + dir.file("out") + "\"}");

  const auto r = run_cli(dir, {"inverse", "--config", dir.file("cfg.json")});
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  CHECK(dma::io::parse_double(stdout_value(r, "identity_residual")) <= 1e-8);

  const auto inverse = dma::io::read_matrix_csv(dir.file("out/inverse.csv"));
  REQUIRE(inverse.rows() == 8);
  // banded by construction: entries beyond |i-j| = 2 are exactly zero
  for (dma::Index i = 0; i < 8; ++i)
    for (dma::Index j = 0; j < 8; ++j)
      if (std::abs(i - j) > 2)
        CHECK(inverse(i, j) == 0.0);
}

TEST_CASE("estimate on Z = (1,2,3) with a constant model recovers the mean")
{
  TempDir dir;
  write_text(dir.file("z.csv"), "1\n2\n3\n");
  // alpha1 = 1000 makes the covariance indistinguishable from the identity on
  // this grid, so the exact weight agrees with plain least squares
  const std::string base =
    "{\"version\":1,"
    "\"kernel\":{\"family\":\"exp_quad\",\"alpha1\":1000},"
    "\"grid\":{\"n\":3,\"domain\":[0,1]},"
    "\"models\":[\"poly0\"],"
    "\"measurements\":\"z.csv\","
    "\"out\":\"" + dir.file("out") + "\",";

  write_text(dir.file("ols.json"), base + "\"weight\":{\"kind\":\"identity\"}}");
  const auto r1 = run_cli(dir, {"estimate", "--config", dir.file("ols.json")});
  CAPTURE(r1.err);
  REQUIRE(r1.code == 0);
  CHECK(stdout_value(r1, "written") == dir.file("out") + "/estimate.csv");

  const auto lines = dma::io::read_lines(dir.file("out/estimate.csv"));
  REQUIRE(lines.size() == 7);
  CHECK(is_config_stamp(lines[0]));
  CHECK(lines[1] == "weight,identity");
  CHECK(lines[2] == "n,3");
  CHECK(lines[3] == "p,1");
  const double ols_coef =
    dma::io::parse_double(lines[4].substr(std::string("coefficients,").size()));
  CHECK(std::abs(ols_coef - 2.0) <= 1e-12);

  // the exact weight gives the same answer because K is numerically I
  write_text(dir.file("blue.json"), base + "\"weight\":{\"kind\":\"blue\"}}");
  const auto r2 = run_cli(dir, {"estimate", "--config", dir.file("blue.json")});
  REQUIRE(r2.code == 0);
  const auto lines2 = dma::io::read_lines(dir.file("out/estimate.csv"));
  CHECK(lines2[1] == "weight,full_inverse");
  const double coef = dma::io::parse_double(lines2[4].substr(std::string("coefficients,").size()));
  CHECK(std::abs(coef - 2.0) <= 1e-12);

  const auto dispersion = dma::io::read_matrix_csv(dir.file("out/dispersion.csv"));
  CHECK(dispersion.rows() == 1);
  CHECK(std::abs(dispersion(0, 0) - 1.0 / 3.0) <= 1e-12);
}

TEST_CASE("sweep writes the table, a curve per cell and the convergence profile")
{
  TempDir dir;
  write_text(dir.file("cfg.json"),
             "{\"version\":1,"
             "\"kernel\":{\"family\":\"exp_quad_cos\",\"pairs\":[[3,20]]},"
             "\"models\":[\"poly1\"],"
             "\"m_values\":[0,-1],"
             "\"out\":\"" + dir.file("out") + "\"}");

  const auto r = run_cli(dir, {"sweep", "--config", dir.file("cfg.json")});
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  CHECK(stdout_value(r, "cells") == "1");
  CHECK(stdout_value(r, "written") == dir.file("out") + "/sweep.csv");
  CHECK(!r.out_has("profile,skipped_no_reference"));

  const auto sweep = dma::io::read_lines(dir.file("out/sweep.csv"));
  REQUIRE(sweep.size() == 4);   // stamp, header, one row per m
  CHECK(is_config_stamp(sweep[0]));
  CHECK(sweep[1] == "kernel,params,model,m,det,trace,psi_ratio_det,psi_ratio_tr,status");
  CHECK(sweep[2].rfind("exp_quad_cos,alpha1=3;alpha2=20,poly1,0,", 0) == 0);
  CHECK(sweep[3].rfind("exp_quad_cos,alpha1=3;alpha2=20,poly1,15,", 0) == 0);
  for (std::size_t i = 2; i < sweep.size(); ++i)
    CHECK(sweep[i].substr(sweep[i].rfind(',') + 1) == "ok");

  // the psi columns carry the per-cell OLS/BLUE summary, identical on every
  // row of the cell; this strongly correlated cell gains well over 10x
  const auto row0 = dma::io::split_fields(sweep[2]);
  const auto row_ref = dma::io::split_fields(sweep[3]);
  REQUIRE(row0.size() == 9);
  REQUIRE(row_ref.size() == 9);
  CHECK(row0[6] == row_ref[6]);
  CHECK(row0[7] == row_ref[7]);
  CHECK(dma::io::parse_double(row_ref[6]) > 10.0);
  CHECK(dma::io::parse_double(row_ref[7]) > 1.0);
  // the reference dispersion is the smallest one in the cell
  CHECK(dma::io::parse_double(row_ref[4]) < dma::io::parse_double(row0[4]));

  CHECK(fs::exists(dir.file("out/curve_exp_quad_cos_a1_3_a2_20_poly1.csv")));
  const auto profile = dma::io::read_lines(dir.file("out/profile.csv"));
  REQUIRE(profile.size() == 3);
  CHECK(profile[1] == "kernel,params,model,first_m,converged");
}

TEST_CASE("sweep without a reference m skips the profile file")
{
  TempDir dir;
  write_text(dir.file("cfg.json"),
             "{\"version\":1,"
             "\"kernel\":{\"family\":\"exp_quad\",\"alpha1\":5},"
             "\"models\":[\"poly0\"],"
             "\"m_values\":[0,1],"
             "\"out\":\"" + dir.file("out") + "\"}");

  const auto r = run_cli(dir, {"sweep", "--config", dir.file("cfg.json")});
  REQUIRE(r.code == 0);
  CHECK(r.out_has("profile,skipped_no_reference"));
  CHECK(!fs::exists(dir.file("out/profile.csv")));
}

TEST_CASE("sweep output is byte-identical across reruns and job counts")
{
  TempDir dir;
  const auto config_with_out = [&](const std::string& out) {
    return "{\"version\":1,"
           "\"kernel\":{\"family\":\"exp_quad\",\"alpha1\":[5,20]},"
           "\"models\":[\"poly0\",\"poly1\"],"
           "\"m_values\":[0,1,-1],"
           "\"out\":\"" + dir.file(out) + "\"}";
  };
  write_text(dir.file("a.json"), config_with_out("a"));
  write_text(dir.file("b.json"), config_with_out("b"));

  REQUIRE(run_cli(dir, {"sweep", "--config", dir.file("a.json"), "--jobs", "1"}).code == 0);
  REQUIRE(run_cli(dir, {"sweep", "--config", dir.file("b.json"), "--jobs", "4"}).code == 0);

  // the config hash differs (out is excluded, but written files must match
  // line for line apart from nothing: out is not serialized, so the stamps
  // agree too)
  CHECK(slurp(dir.file("a/sweep.csv")) == slurp(dir.file("b/sweep.csv")));
  CHECK(slurp(dir.file("a/profile.csv")) == slurp(dir.file("b/profile.csv")));
  CHECK(slurp(dir.file("a/curve_exp_quad_a1_5_poly0.csv")) ==
        slurp(dir.file("b/curve_exp_quad_a1_5_poly0.csv")));
  CHECK(slurp(dir.file("a/sweep.csv")).find("exp_quad,alpha1=20,poly1,15,") != std::string::npos);
}

TEST_CASE("sample reproduces bytes for a fixed seed and moves with the seed")
{
  TempDir dir;
  const auto config_with_out = [&](const std::string& out) {
    return "{\"version\":1,"
           "\"kernel\":{\"family\":\"exp_quad\",\"alpha1\":1000},"
           "\"models\":[\"poly0\"],"
           "\"weight\":{\"kind\":\"blue\"},"
           "\"monte_carlo\":{\"samples\":2000,\"seed\":11},"
           "\"grid\":{\"n\":8},"
           "\"out\":\"" + dir.file(out) + "\"}";
  };
  write_text(dir.file("a.json"), config_with_out("a"));
  write_text(dir.file("b.json"), config_with_out("b"));
  write_text(dir.file("c.json"), config_with_out("c"));

  const auto r1 = run_cli(dir, {"sample", "--config", dir.file("a.json")});
  CAPTURE(r1.err);
  REQUIRE(r1.code == 0);
  CHECK(dma::io::parse_double(stdout_value(r1, "worst_rel_trace_dev")) < 0.10);
  REQUIRE(run_cli(dir, {"sample", "--config", dir.file("b.json")}).code == 0);
  CHECK(slurp(dir.file("a/sample.csv")) == slurp(dir.file("b/sample.csv")));

  // the --seed flag wins over the config seed and changes the draw
  REQUIRE(run_cli(dir, {"sample", "--config", dir.file("c.json"), "--seed", "12"}).code == 0);
  CHECK(slurp(dir.file("a/sample.csv")) != slurp(dir.file("c/sample.csv")));
}

TEST_CASE("config mistakes exit with code 2 and a machine-readable error line")
{
  TempDir dir;

  SUBCASE("missing config file")
  {
    const auto r = run_cli(dir, {"approx", "--config", dir.file("absent.json")});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error,config_error,", 0) == 0);
  }

  SUBCASE("unknown key")
  {
    write_text(dir.file("cfg.json"), "{\"version\":1,\"kernle\":{}}");
    const auto r = run_cli(dir, {"approx", "--config", dir.file("cfg.json")});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error,config_error,", 0) == 0);
  }

  SUBCASE("approx without the connectivity field")
  {
    write_text(dir.file("cfg.json"),
               "{\"version\":1,\"kernel\":{\"family\":\"exp_quad\",\"alpha1\":3}}");
    const auto r = run_cli(dir, {"approx", "--config", dir.file("cfg.json")});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error,config_error,", 0) == 0);
  }

  SUBCASE("connectivity out of range")
  {
    write_text(dir.file("cfg.json"),
               "{\"version\":1,\"kernel\":{\"family\":\"exp_quad\",\"alpha1\":3},"
               "\"grid\":{\"n\":8},\"m\":20,"
               "\"out\":\"" + dir.file("out") + "\"}");
    const auto r = run_cli(dir, {"approx", "--config", dir.file("cfg.json")});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error,invalid_connectivity,", 0) == 0);
  }
}

TEST_CASE("numerical failures exit with code 3")
{
  TempDir dir;
  // symmetric but indefinite: eigenvalues 3 and -1
  write_text(dir.file("k.csv"), "n,2\n1,2\n2,1\n");
  write_text(dir.file("cfg.json"),
             "{\"version\":1,\"matrix\":\"k.csv\",\"m\":1,"
             "\"out\":\"" + dir.file("out") + "\"}");

  const auto r = run_cli(dir, {"approx", "--config", dir.file("cfg.json")});
  CHECK(r.code == 3);
  CHECK(r.err.rfind("error,not_positive_definite,", 0) == 0);
}

TEST_CASE("--dry-run validates the config without writing anything")
{
  TempDir dir;
  write_text(dir.file("cfg.json"),
             "{\"version\":1,"
             "\"kernel\":{\"family\":\"exp_quad\",\"alpha1\":5},"
             "\"models\":[\"poly0\"],"
             "\"out\":\"" + dir.file("out") + "\"}");

  const auto dry = run_cli(dir, {"sweep", "--config", dir.file("cfg.json"), "--dry-run"});
  REQUIRE(dry.code == 0);
  const std::string hash = stdout_value(dry, "dry_run");
  CHECK(hash.rfind("ok,", 0) == 0);
  CHECK(hash.size() == 3 + 16);
  CHECK(!fs::exists(dir.file("out")));

  // the stamp in a real run matches the hash the dry run printed
  REQUIRE(run_cli(dir, {"sweep", "--config", dir.file("cfg.json")}).code == 0);
  CHECK(first_line(dir.file("out/sweep.csv")) == "# config=" + hash.substr(3));

  // dry runs still catch missing inputs
  write_text(dir.file("bad.json"), "{\"version\":1,\"matrix\":\"absent.csv\",\"m\":1}");
  const auto bad = run_cli(dir, {"approx", "--config", dir.file("bad.json"), "--dry-run"});
  CHECK(bad.code == 2);
  CHECK(bad.err.rfind("error,io_error,", 0) == 0);
}

TEST_CASE("--quiet silences stdout but still writes the files")
{
  TempDir dir;
  write_text(dir.file("cfg.json"),
             "{\"version\":1,"
             "\"kernel\":{\"family\":\"exp_quad\",\"alpha1\":3},"
             "\"grid\":{\"n\":8},\"m\":1,"
             "\"out\":\"ignored\"}");

  const auto r = run_cli(dir, {"approx", "--config", dir.file("cfg.json"), "--quiet", "--out",
                               dir.file("out")});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  CHECK(fs::exists(dir.file("out/adjoint.csv")));
  // --out wins over the config value, which is never created
  CHECK(!fs::exists("ignored"));
}
