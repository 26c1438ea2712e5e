#ifndef DMA_IO_HPP
#define DMA_IO_HPP

#include "dma/types.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace dma::io
{
  // Shortest decimal that round-trips to the same double; locale-free in
  // both directions so written files are bit-stable across runs.
  std::string format_double(double v);
  double parse_double(std::string_view s);

  std::vector<std::string> split_fields(std::string_view line);

  void write_lines(const std::string& path, const std::vector<std::string>& lines);
  std::vector<std::string> read_lines(const std::string& path);

  // Matrix file: optional '#' comment lines, a header `n,<n>`, then n rows of
  // n comma-separated values.
  void write_matrix_csv(const std::string& path, const MatX<double>& M,
                        const std::vector<std::string>& comments = {});
  MatX<double> read_matrix_csv(const std::string& path);

  // Factor file: optional '#' comment lines, a header `n,<n>,m,<m>`, then row
  // i as `i,<alpha_i>,<gamma components of point i>` (min(i, m) of them).
  void write_factor_csv(const std::string& path, const MarkovFactor<double>& f,
                        const std::vector<std::string>& comments = {});
  MarkovFactor<double> read_factor_csv(const std::string& path);
}

#endif
