#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsvm/io.hpp"

namespace qsvm {

struct LabeledSet {
  std::vector<std::vector<double>> points;
  std::vector<int> labels;  // strictly -1 or +1

  std::size_t size() const { return points.size(); }
  int dimension() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }

  void validate() const {
    if (points.size() != labels.size())
      throw std::invalid_argument("LabeledSet: points/labels size mismatch");
    for (int y : labels)
      if (y != -1 && y != 1) throw std::invalid_argument("LabeledSet: labels must be -1 or +1");
    for (const auto& p : points)
      if (p.size() != points.front().size())
        throw std::invalid_argument("LabeledSet: inconsistent point dimensions");
  }
};

inline std::string dataset_to_csv(const LabeledSet& data) {
  data.validate();
  std::string out;
  const int dim = data.dimension();
  for (int k = 1; k <= dim; ++k) {
    out += "x_" + std::to_string(k);
    out += ',';
  }
  out += "y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.points[i]) {
      out += format_double(v);
      out += ',';
    }
    out += (data.labels[i] > 0 ? "1" : "-1");
    out += '\n';
  }
  return out;
}

inline LabeledSet dataset_from_csv(const std::string& text) {
  LabeledSet data;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset CSV: empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "y")
    throw std::runtime_error("dataset CSV: expected header x_1,...,x_q,y");
  const std::size_t dim = header.size() - 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != dim + 1) throw std::runtime_error("dataset CSV: bad row width");
    std::vector<double> p(dim);
    for (std::size_t k = 0; k < dim; ++k) p[k] = parse_double(fields[k]);
    const int y = static_cast<int>(parse_double(fields[dim]));
    data.points.push_back(std::move(p));
    data.labels.push_back(y);
  }
  data.validate();
  return data;
}

inline void save_dataset(const LabeledSet& data, const std::filesystem::path& path) {
  write_file_atomic(path, dataset_to_csv(data));
}

inline LabeledSet load_dataset(const std::filesystem::path& path) {
  return dataset_from_csv(read_file(path));
}

}  // namespace qsvm
