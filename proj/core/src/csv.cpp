#include "kdvlab/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace kdvlab {

CsvWriter::CsvWriter(const std::string& path, const std::string& comment,
                     const std::vector<std::string>& columns)
    : path_(path), out_(path) {
  if (!out_) throw std::runtime_error("cannot open output file: " + path);
  out_ << "# " << comment << "\n";
  for (size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  for (size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_full(values[i]);
  out_ << "\n";
}

void CsvWriter::row_raw(const std::string& line) { out_ << line << "\n"; }

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<double>& x, const std::vector<std::vector<double>>& ys,
                    bool log_x, bool log_y) {
  const int W = 640, H = 420, ml = 60, mr = 20, mt = 40, mb = 40;
  auto tx = [&](double v) { return log_x ? std::log10(std::max(v, 1e-300)) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (double v : x) {
    x0 = std::min(x0, tx(v));
    x1 = std::max(x1, tx(v));
  }
  for (const auto& ycol : ys)
    for (double v : ycol) {
      if (!std::isfinite(ty(v))) continue;
      y0 = std::min(y0, ty(v));
      y1 = std::max(y1, ty(v));
    }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (ty(v) - y0) / (y1 - y0) * (H - mt - mb); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open plot file: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  out << "<rect x='" << ml << "' y='" << mt << "' width='" << W - ml - mr << "' height='"
      << H - mt - mb << "' fill='none' stroke='black'/>\n";
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  for (size_t s = 0; s < ys.size(); ++s) {
    out << "<polyline fill='none' stroke='" << colors[s % 5] << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < x.size() && i < ys[s].size(); ++i)
      out << px(x[i]) << "," << py(ys[s][i]) << " ";
    out << "'/>\n";
  }
  out << "</svg>\n";
}

}  // namespace kdvlab
