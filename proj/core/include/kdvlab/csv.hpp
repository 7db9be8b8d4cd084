#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace kdvlab {

/// CSV emitter: one header row naming the columns plus a leading comment
/// line carrying the config hash and window sizes. All numbers are printed
/// with 17 significant digits so equal runs produce byte-identical files.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& comment,
            const std::vector<std::string>& columns);

  void row(const std::vector<double>& values);
  void row_raw(const std::string& line);

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

std::string format_full(double v);

/// FNV-1a over a file's bytes; the determinism check compares these.
std::uint64_t hash_file(const std::string& path);

/// Minimal standalone SVG polyline plot (x ascending); optional output.
void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<double>& x, const std::vector<std::vector<double>>& ys,
                    bool log_x = false, bool log_y = false);

}  // namespace kdvlab
