#ifndef STEERLAB_CSV_HPP
#define STEERLAB_CSV_HPP

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "steerlab/errors.hpp"

namespace steerlab {

// Numeric fields are serialized with 17 significant digits so that reading
// them back reproduces the exact double.
inline std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) { append_row(header); }

  void append_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells[i];
    }
    out_ += '\n';
  }

  const std::string& str() const { return out_; }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ArtifactError("cannot write csv: " + path);
    f << out_;
  }

 private:
  std::string out_;
};

}  // namespace steerlab

#endif  // STEERLAB_CSV_HPP
