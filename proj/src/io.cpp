#include "dma/io.hpp"

#include "dma/markov.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace dma::io
{
  std::string format_double(double v)
  {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
      throw IoError("failed to format a floating point value");
    return std::string(buf, ptr);
  }

  double parse_double(std::string_view s)
  {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw IoError("not a number: '" + std::string(s) + "'");
    return v;
  }

  std::vector<std::string> split_fields(std::string_view line)
  {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true)
    {
      const std::size_t pos = line.find(',', start);
      if (pos == std::string_view::npos)
      {
        fields.emplace_back(line.substr(start));
        return fields;
      }
      fields.emplace_back(line.substr(start, pos - start));
      start = pos + 1;
    }
  }

  void write_lines(const std::string& path, const std::vector<std::string>& lines)
  {
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw IoError("cannot open '" + path + "' for writing");
    for (const auto& line : lines)
      out << line << '\n';
    if (!out)
      throw IoError("failed while writing '" + path + "'");
  }

  std::vector<std::string> read_lines(const std::string& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
    {
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      lines.push_back(line);
    }
    return lines;
  }

  namespace
  {
    // data lines = everything that is neither blank nor a '#' comment
    std::vector<std::string> data_lines(const std::vector<std::string>& lines)
    {
      std::vector<std::string> out;
      for (const auto& line : lines)
        if (!line.empty() && line[0] != '#')
          out.push_back(line);
      return out;
    }

    Index parse_index(std::string_view s, const char* what)
    {
      long long v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size())
        throw IoError(std::string("not an integer ") + what + ": '" + std::string(s) + "'");
      return static_cast<Index>(v);
    }
  }

  void write_matrix_csv(const std::string& path, const MatX<double>& M,
                        const std::vector<std::string>& comments)
  {
    if (M.rows() != M.cols())
      throw IoError("matrix file format holds square matrices only");
    std::vector<std::string> lines;
    for (const auto& c : comments)
      lines.push_back("# " + c);
    lines.push_back("n," + std::to_string(M.rows()));
    for (Index i = 0; i < M.rows(); ++i)
    {
      std::string row;
      for (Index j = 0; j < M.cols(); ++j)
      {
        if (j > 0)
          row += ',';
        row += format_double(M(i, j));
      }
      lines.push_back(std::move(row));
    }
    write_lines(path, lines);
  }

  MatX<double> read_matrix_csv(const std::string& path)
  {
    const auto lines = data_lines(read_lines(path));
    if (lines.empty())
      throw IoError("matrix file '" + path + "' is empty");
    const auto header = split_fields(lines[0]);
    if (header.size() != 2 || header[0] != "n")
      throw IoError("matrix file '" + path + "' must start with a 'n,<n>' header");
    const Index n = parse_index(header[1], "order");
    if (n < 1)
      throw IoError("matrix order must be at least 1");
    if (static_cast<Index>(lines.size()) != n + 1)
      throw IoError("matrix file '" + path + "' must have exactly n data rows");

    MatX<double> M(n, n);
    for (Index i = 0; i < n; ++i)
    {
      const auto fields = split_fields(lines[static_cast<std::size_t>(i + 1)]);
      if (static_cast<Index>(fields.size()) != n)
        throw IoError("matrix row " + std::to_string(i) + " must have n values");
      for (Index j = 0; j < n; ++j)
        M(i, j) = parse_double(fields[static_cast<std::size_t>(j)]);
    }
    return M;
  }

  void write_factor_csv(const std::string& path, const MarkovFactor<double>& f,
                        const std::vector<std::string>& comments)
  {
    std::vector<std::string> lines;
    for (const auto& c : comments)
      lines.push_back("# " + c);
    lines.push_back("n," + std::to_string(f.n) + ",m," + std::to_string(f.m));
    for (Index i = 0; i < f.n; ++i)
    {
      std::string row = std::to_string(i) + ',' + format_double(f.alphas[i]);
      if (i > 0)
      {
        const auto& g = f.gammas[static_cast<std::size_t>(i - 1)];
        for (Index l = 0; l < g.size(); ++l)
          row += ',' + format_double(g[l]);
      }
      lines.push_back(std::move(row));
    }
    write_lines(path, lines);
  }

  MarkovFactor<double> read_factor_csv(const std::string& path)
  {
    const auto lines = data_lines(read_lines(path));
    if (lines.empty())
      throw IoError("factor file '" + path + "' is empty");
    const auto header = split_fields(lines[0]);
    if (header.size() != 4 || header[0] != "n" || header[2] != "m")
      throw IoError("factor file '" + path + "' must start with a 'n,<n>,m,<m>' header");
    const Index n = parse_index(header[1], "order");
    const Index m = parse_index(header[3], "connectivity");
    if (n < 1 || m < 0 || m > n - 1)
      throw IoError("factor header violates 0 <= m <= n-1");
    if (static_cast<Index>(lines.size()) != n + 1)
      throw IoError("factor file '" + path + "' must have exactly n data rows");

    MarkovFactor<double> f;
    f.n = n;
    f.m = m;
    f.alphas = VecX<double>(n);
    f.gammas.resize(static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i)
    {
      const auto fields = split_fields(lines[static_cast<std::size_t>(i + 1)]);
      const Index expected = 2 + std::min(i, m);
      if (static_cast<Index>(fields.size()) != expected)
        throw IoError("factor row " + std::to_string(i) + " must have " +
                      std::to_string(expected) + " fields");
      if (parse_index(fields[0], "row index") != i)
        throw IoError("factor rows must be numbered 0..n-1 in order");
      f.alphas[i] = parse_double(fields[1]);
      if (!(f.alphas[i] > 0))
        throw IoError("factor row " + std::to_string(i) + " has a non-positive innovation variance");
      if (i > 0)
      {
        VecX<double> g(std::min(i, m));
        for (Index l = 0; l < g.size(); ++l)
          g[l] = parse_double(fields[static_cast<std::size_t>(2 + l)]);
        f.gammas[static_cast<std::size_t>(i - 1)] = std::move(g);
      }
    }
    f.band = band_from_factor(f);
    return f;
  }
}
