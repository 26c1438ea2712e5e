#include "dma/config.hpp"

#include "dma/covariance.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace dma
{
  using nlohmann::json;

  VecX<double> GridConfig::build() const
  {
    if (!points.empty())
    {
      VecX<double> t(static_cast<Index>(points.size()));
      for (Index i = 0; i < t.size(); ++i)
        t[i] = points[static_cast<std::size_t>(i)];
      validate_grid(t);
      return t;
    }
    return equidistant_grid<double>(n, lo, hi);
  }

  std::vector<CovKernel<double>> KernelConfig::cells() const
  {
    std::vector<CovKernel<double>> out;
    if (!pairs.empty())
    {
      for (const auto& [a1, a2] : pairs)
        out.push_back({family, a1, a2});
    }
    else
    {
      const std::vector<double> a2s = alpha2.empty() ? std::vector<double>{0.0} : alpha2;
      for (double a1 : alpha1)
        for (double a2 : a2s)
          out.push_back({family, a1, a2});
    }
    for (const auto& k : out)
      validate_kernel(k);
    return out;
  }

  namespace
  {
    void check_keys(const json& obj, const std::string& ctx,
                    const std::set<std::string>& allowed)
    {
      for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
          throw ConfigError("unknown key '" + key + "' in " + ctx);
    }

    double as_number(const json& v, const std::string& ctx)
    {
      if (!v.is_number())
        throw ConfigError(ctx + " must be a number");
      return v.get<double>();
    }

    Index as_integer(const json& v, const std::string& ctx)
    {
      if (!v.is_number_integer())
        throw ConfigError(ctx + " must be an integer");
      return v.get<Index>();
    }

    std::vector<double> as_number_list(const json& v, const std::string& ctx)
    {
      if (!v.is_array())
        throw ConfigError(ctx + " must be an array of numbers");
      std::vector<double> out;
      for (const auto& item : v)
        out.push_back(as_number(item, ctx + " entry"));
      return out;
    }

    KernelFamily parse_family(const std::string& name)
    {
      if (name == "exp_abs_cos")
        return KernelFamily::ExpAbsCos;
      if (name == "exp_quad")
        return KernelFamily::ExpQuad;
      if (name == "exp_quad_cos")
        return KernelFamily::ExpQuadCos;
      throw ConfigError("unknown kernel family '" + name +
                        "' (expected exp_abs_cos, exp_quad or exp_quad_cos)");
    }

    KernelConfig parse_kernel(const json& obj)
    {
      if (!obj.is_object())
        throw ConfigError("'kernel' must be an object");
      check_keys(obj, "kernel", {"family", "alpha1", "alpha2", "pairs"});
      if (!obj.contains("family"))
        throw ConfigError("kernel needs a 'family'");
      KernelConfig k;
      k.family = parse_family(obj["family"].get<std::string>());
      if (obj.contains("alpha1"))
        k.alpha1 = obj["alpha1"].is_array() ? as_number_list(obj["alpha1"], "kernel.alpha1")
                                            : std::vector<double>{as_number(obj["alpha1"], "kernel.alpha1")};
      if (obj.contains("alpha2"))
        k.alpha2 = obj["alpha2"].is_array() ? as_number_list(obj["alpha2"], "kernel.alpha2")
                                            : std::vector<double>{as_number(obj["alpha2"], "kernel.alpha2")};
      if (obj.contains("pairs"))
      {
        if (!obj["pairs"].is_array())
          throw ConfigError("kernel.pairs must be an array of [alpha1, alpha2] pairs");
        for (const auto& p : obj["pairs"])
        {
          if (!p.is_array() || p.size() != 2)
            throw ConfigError("kernel.pairs entries must be [alpha1, alpha2]");
          k.pairs.emplace_back(as_number(p[0], "pair alpha1"), as_number(p[1], "pair alpha2"));
        }
      }
      if (k.alpha1.empty() && k.pairs.empty())
        throw ConfigError("kernel needs 'alpha1' values or explicit 'pairs'");
      return k;
    }

    RegressionBasis<double> parse_model(const json& v)
    {
      RegressionBasis<double> b;
      if (v.is_string())
      {
        const std::string name = v.get<std::string>();
        if (name.rfind("poly", 0) == 0 && name.size() == 5 && name[4] >= '0' && name[4] <= '3')
        {
          b.kind = BasisKind::Polynomial;
          b.degree = name[4] - '0';
          return b;
        }
        throw ConfigError("unknown model '" + name + "' (expected poly0..poly3 or a gauss object)");
      }
      if (!v.is_object())
        throw ConfigError("model entries must be strings or objects");
      check_keys(v, "model", {"kind", "degree", "theta", "t0"});
      const std::string kind = v.contains("kind") ? v["kind"].get<std::string>() : "poly";
      if (kind == "poly")
      {
        b.kind = BasisKind::Polynomial;
        b.degree = v.contains("degree") ? static_cast<int>(as_integer(v["degree"], "model.degree")) : 0;
      }
      else if (kind == "gauss")
      {
        b.kind = BasisKind::GaussianCurve;
        b.theta = v.contains("theta") ? as_number(v["theta"], "model.theta") : 1.0;
        b.t0 = v.contains("t0") ? as_number(v["t0"], "model.t0") : 0.0;
      }
      else
        throw ConfigError("unknown model kind '" + kind + "'");
      validate_basis(b);
      return b;
    }

    GridConfig parse_grid(const json& obj)
    {
      if (!obj.is_object())
        throw ConfigError("'grid' must be an object");
      check_keys(obj, "grid", {"n", "domain", "points"});
      GridConfig g;
      if (obj.contains("points"))
      {
        g.points = as_number_list(obj["points"], "grid.points");
        if (obj.contains("n") && as_integer(obj["n"], "grid.n") != static_cast<Index>(g.points.size()))
          throw ConfigError("grid.n disagrees with the number of explicit points");
        g.n = static_cast<Index>(g.points.size());
        return g;
      }
      if (obj.contains("n"))
        g.n = as_integer(obj["n"], "grid.n");
      if (obj.contains("domain"))
      {
        const auto d = as_number_list(obj["domain"], "grid.domain");
        if (d.size() != 2)
          throw ConfigError("grid.domain must be [lo, hi]");
        g.lo = d[0];
        g.hi = d[1];
      }
      return g;
    }

    WeightSpec parse_weight(const json& obj)
    {
      if (!obj.is_object())
        throw ConfigError("'weight' must be an object");
      check_keys(obj, "weight", {"kind", "m"});
      if (!obj.contains("kind"))
        throw ConfigError("weight needs a 'kind'");
      const std::string kind = obj["kind"].get<std::string>();
      if (kind == "identity" || kind == "ols")
        return WeightSpec::identity();
      if (kind == "diagonal" || kind == "wlse")
        return WeightSpec::diagonal_of_k();
      if (kind == "full_inverse" || kind == "blue")
        return WeightSpec::full_inverse();
      if (kind == "markov")
      {
        if (!obj.contains("m"))
          throw ConfigError("markov weight needs 'm'");
        return WeightSpec::markov(as_integer(obj["m"], "weight.m"));
      }
      throw ConfigError("unknown weight kind '" + kind + "'");
    }

    McConfig parse_mc(const json& obj)
    {
      if (!obj.is_object())
        throw ConfigError("'monte_carlo' must be an object");
      check_keys(obj, "monte_carlo", {"samples", "seed", "beta"});
      McConfig mc;
      if (obj.contains("samples"))
        mc.samples = as_integer(obj["samples"], "monte_carlo.samples");
      if (mc.samples < 1000)
        throw ConfigError("monte_carlo.samples must be at least 1000");
      if (obj.contains("seed"))
      {
        if (!obj["seed"].is_number_unsigned() && !obj["seed"].is_number_integer())
          throw ConfigError("monte_carlo.seed must be a non-negative integer");
        mc.seed = obj["seed"].get<std::uint64_t>();
        mc.has_seed = true;
      }
      if (obj.contains("beta"))
        mc.beta = as_number_list(obj["beta"], "monte_carlo.beta");
      return mc;
    }
  }

  RunConfig parse_config(const std::string& text, const std::string& origin)
  {
    json root;
    try
    {
      root = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
      throw ConfigError(origin + ": " + e.what());
    }
    if (!root.is_object())
      throw ConfigError(origin + ": config must be a JSON object");
    check_keys(root, "config",
               {"version", "kernel", "models", "grid", "weight", "m", "m_values",
                "profile_tol", "monte_carlo", "jitter", "variance_scale",
                "matrix", "measurements", "out"});
    if (!root.contains("version"))
      throw ConfigError(origin + ": config needs a 'version' field");
    RunConfig cfg;
    cfg.version = static_cast<int>(as_integer(root["version"], "version"));
    if (cfg.version != 1)
      throw ConfigError("unsupported config version " + std::to_string(cfg.version));

    if (root.contains("kernel"))
    {
      cfg.kernel = parse_kernel(root["kernel"]);
      cfg.has_kernel = true;
    }
    if (root.contains("models"))
    {
      if (!root["models"].is_array())
        throw ConfigError("'models' must be an array");
      for (const auto& v : root["models"])
        cfg.models.push_back(parse_model(v));
    }
    if (root.contains("grid"))
      cfg.grid = parse_grid(root["grid"]);
    if (root.contains("weight"))
    {
      cfg.weight = parse_weight(root["weight"]);
      cfg.has_weight = true;
    }
    if (root.contains("m"))
    {
      cfg.m = as_integer(root["m"], "m");
      cfg.has_m = true;
    }
    if (root.contains("m_values"))
    {
      cfg.m_values.clear();
      if (!root["m_values"].is_array() || root["m_values"].empty())
        throw ConfigError("'m_values' must be a non-empty array");
      for (const auto& v : root["m_values"])
      {
        const Index m = as_integer(v, "m_values entry");
        if (m < -1)
          throw ConfigError("m_values entries must be >= -1 (-1 means n-1)");
        cfg.m_values.push_back(m);
      }
    }
    if (root.contains("profile_tol"))
    {
      cfg.profile_tol = as_number(root["profile_tol"], "profile_tol");
      if (!(cfg.profile_tol > 0))
        throw ConfigError("profile_tol must be > 0");
    }
    if (root.contains("monte_carlo"))
    {
      cfg.mc = parse_mc(root["monte_carlo"]);
      cfg.has_mc = true;
    }
    if (root.contains("jitter"))
      cfg.jitter = as_number(root["jitter"], "jitter");
    if (root.contains("variance_scale"))
      cfg.variance_scale = as_number(root["variance_scale"], "variance_scale");
    if (root.contains("matrix"))
      cfg.matrix_file = root["matrix"].get<std::string>();
    if (root.contains("measurements"))
      cfg.measurements_file = root["measurements"].get<std::string>();
    if (root.contains("out"))
      cfg.out_dir = root["out"].get<std::string>();
    return cfg;
  }

  RunConfig load_config(const std::string& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
  }

  namespace
  {
    json canonical_json(const RunConfig& cfg)
    {
      json root;
      root["version"] = cfg.version;
      if (cfg.has_kernel)
      {
        json k;
        k["family"] = kernel_family_name(cfg.kernel.family);
        k["alpha1"] = cfg.kernel.alpha1;
        k["alpha2"] = cfg.kernel.alpha2;
        json pairs = json::array();
        for (const auto& [a1, a2] : cfg.kernel.pairs)
          pairs.push_back({a1, a2});
        k["pairs"] = pairs;
        root["kernel"] = k;
      }
      json models = json::array();
      for (const auto& b : cfg.models)
      {
        if (b.kind == BasisKind::Polynomial)
          models.push_back(basis_name(b));
        else
          models.push_back({{"kind", "gauss"}, {"theta", b.theta}, {"t0", b.t0}});
      }
      root["models"] = models;
      if (!cfg.grid.points.empty())
        root["grid"] = {{"points", cfg.grid.points}};
      else
        root["grid"] = {{"n", cfg.grid.n}, {"domain", {cfg.grid.lo, cfg.grid.hi}}};
      if (cfg.has_weight)
        root["weight"] = cfg.weight.name();
      if (cfg.has_m)
        root["m"] = cfg.m;
      root["m_values"] = cfg.m_values;
      root["profile_tol"] = cfg.profile_tol;
      if (cfg.has_mc)
        root["monte_carlo"] = {{"samples", cfg.mc.samples},
                               {"seed", cfg.mc.seed},
                               {"beta", cfg.mc.beta}};
      root["jitter"] = cfg.jitter;
      root["variance_scale"] = cfg.variance_scale;
      root["matrix"] = cfg.matrix_file;
      root["measurements"] = cfg.measurements_file;
      return root;
    }

    std::uint64_t fnv1a(const std::string& data)
    {
      std::uint64_t hash = 1469598103934665603ULL;
      for (unsigned char c : data)
      {
        hash ^= c;
        hash *= 1099511628211ULL;
      }
      return hash;
    }
  }

  std::string config_hash(const RunConfig& cfg)
  {
    const std::uint64_t h = fnv1a(canonical_json(cfg).dump());
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h;
    return hex.str();
  }
}
