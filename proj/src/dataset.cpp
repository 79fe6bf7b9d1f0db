#include "reluphase/dataset.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "reluphase/io_util.hpp"

namespace reluphase {

Dataset synthetic_1d(const std::vector<std::pair<double, double>>& points) {
  if (points.empty()) throw std::invalid_argument("synthetic_1d needs at least one point");
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (points[i].first == points[j].first) {
        throw std::invalid_argument("synthetic_1d inputs must be distinct");
      }
    }
  }
  Dataset ds;
  ds.n = points.size();
  ds.d = 2;
  ds.x.reserve(ds.n * 2);
  ds.y.reserve(ds.n);
  for (const auto& [input, target] : points) {
    ds.x.push_back(input);
    ds.x.push_back(1.0);
    ds.y.push_back(target);
  }
  return ds;
}

Dataset default_dataset() {
  return synthetic_1d({{0.1, 0.8}, {0.35, 0.2}, {0.6, 0.6}, {0.85, 0.4}});
}

ValidationReport validate(const Dataset& ds, bool theory_mode) {
  ValidationReport report;
  auto flag = [&report](const std::string& msg) {
    report.ok = false;
    report.violations.push_back(msg);
  };
  if (ds.n < 1) flag("n >= 1 required");
  if (ds.d < 2) flag("d >= 2 required");
  if (ds.x.size() != ds.n * ds.d) flag("X size is not n*d");
  if (ds.y.size() != ds.n) flag("y size is not n");
  if (!report.ok) return report;

  for (std::size_t i = 0; i < ds.n; ++i) {
    const double* xi = ds.row(i);
    if (xi[ds.d - 1] != 1.0) {
      flag("row " + std::to_string(i) + " bias coordinate is " + g17(xi[ds.d - 1]) + ", not 1");
    }
    for (std::size_t j = 0; j < ds.d; ++j) {
      if (!std::isfinite(xi[j])) {
        flag("row " + std::to_string(i) + " has a non-finite coordinate");
        break;
      }
    }
    if (!std::isfinite(ds.y[i])) flag("y[" + std::to_string(i) + "] is non-finite");
  }
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = i + 1; j < ds.n; ++j) {
      bool same = true;
      for (std::size_t k = 0; k < ds.d; ++k) {
        if (ds.row(i)[k] != ds.row(j)[k]) {
          same = false;
          break;
        }
      }
      if (same) flag("rows " + std::to_string(i) + " and " + std::to_string(j) + " are identical");
    }
  }
  if (theory_mode) {
    double max_y = -1.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
      const double* xi = ds.row(i);
      for (std::size_t j = 0; j < ds.d; ++j) {
        if (xi[j] < 0.0 || xi[j] > 1.0) {
          flag("row " + std::to_string(i) + " coordinate outside [0,1]");
          break;
        }
      }
      if (ds.y[i] < 0.0 || ds.y[i] > 1.0) {
        flag("y[" + std::to_string(i) + "] outside [0,1]");
      }
      max_y = std::max(max_y, ds.y[i]);
    }
    if (max_y < 0.5) flag("max target " + g17(max_y) + " < 1/2");
  }
  return report;
}

namespace {

std::uint32_t read_be_u32(std::ifstream& in, const std::string& what) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw std::runtime_error("truncated IDX file while reading " + what);
  }
  return (std::uint32_t(bytes[0]) << 24) | (std::uint32_t(bytes[1]) << 16) |
         (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
}

}  // namespace

Dataset from_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::size_t count,
                 double label_scale) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("cannot open " + labels_path.string());

  const std::uint32_t img_magic = read_be_u32(img, "image magic");
  if (img_magic != 2051) {
    throw std::runtime_error("bad image magic " + std::to_string(img_magic) + ", expected 2051");
  }
  const std::uint32_t img_count = read_be_u32(img, "image count");
  const std::uint32_t rows = read_be_u32(img, "image rows");
  const std::uint32_t cols = read_be_u32(img, "image cols");

  const std::uint32_t lab_magic = read_be_u32(lab, "label magic");
  if (lab_magic != 2049) {
    throw std::runtime_error("bad label magic " + std::to_string(lab_magic) + ", expected 2049");
  }
  const std::uint32_t lab_count = read_be_u32(lab, "label count");
  if (img_count != lab_count) {
    throw std::runtime_error("image count " + std::to_string(img_count) +
                             " != label count " + std::to_string(lab_count));
  }

  std::size_t take = count == 0 ? img_count : std::min<std::size_t>(count, img_count);
  const std::size_t pixels = std::size_t(rows) * cols;

  Dataset ds;
  ds.n = take;
  ds.d = pixels + 1;
  ds.x.resize(take * ds.d);
  ds.y.resize(take);

  std::vector<unsigned char> buf(pixels);
  for (std::size_t i = 0; i < take; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
      throw std::runtime_error("truncated IDX image payload at sample " + std::to_string(i));
    }
    double* xi = ds.x.data() + i * ds.d;
    for (std::size_t p = 0; p < pixels; ++p) xi[p] = buf[p] / 255.0;
    xi[pixels] = 1.0;
    char label = 0;
    if (!lab.read(&label, 1)) {
      throw std::runtime_error("truncated IDX label payload at sample " + std::to_string(i));
    }
    ds.y[i] = static_cast<unsigned char>(label) * label_scale;
  }
  return ds;
}

std::string dataset_to_csv(const Dataset& ds) {
  std::string out;
  for (std::size_t j = 1; j <= ds.d; ++j) {
    out += "x" + std::to_string(j) + ",";
  }
  out += "y\n";
  for (std::size_t i = 0; i < ds.n; ++i) {
    const double* xi = ds.row(i);
    for (std::size_t j = 0; j < ds.d; ++j) {
      out += g17(xi[j]);
      out += ',';
    }
    out += g17(ds.y[i]);
    out += '\n';
  }
  return out;
}

Dataset dataset_from_csv(const std::string& text) {
  std::vector<std::string> lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.size() < 2) throw std::runtime_error("dataset CSV needs a header and rows");

  const std::vector<std::string> header = split(trim(lines[0]), ',');
  if (header.size() < 3 || trim(header.back()) != "y") {
    throw std::runtime_error("dataset CSV header must be x1,...,xd,y");
  }
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j) {
    if (trim(header[j]) != "x" + std::to_string(j + 1)) {
      throw std::runtime_error("dataset CSV header must be x1,...,xd,y");
    }
  }

  Dataset ds;
  ds.d = d;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != d + 1) {
      throw std::runtime_error("dataset CSV row " + std::to_string(i) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(d + 1));
    }
    for (std::size_t j = 0; j < d; ++j) ds.x.push_back(parse_double(fields[j]));
    ds.y.push_back(parse_double(fields[d]));
    ++ds.n;
  }
  if (ds.n == 0) throw std::runtime_error("dataset CSV has no rows");
  return ds;
}

std::uint64_t dataset_fingerprint(const Dataset& ds) { return fnv1a64(dataset_to_csv(ds)); }

}  // namespace reluphase
