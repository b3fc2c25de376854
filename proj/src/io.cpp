#include "egd/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "egd/errors.hpp"

namespace egd::io {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw DataError("binary matrix: truncated input");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

bool parse_double(std::string_view field, double& out) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

MatrixFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? MatrixFormat::csv : MatrixFormat::binary;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

Matrix read_matrix_csv(std::istream& in) {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.find_first_not_of(" \t") == std::string_view::npos) continue;

    const auto fields = split(view);
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (auto f : fields) {
      double v = 0.0;
      if (!parse_double(f, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first_content) {  // header row
        first_content = false;
        cols = fields.size();
        continue;
      }
      throw DataError("csv line " + std::to_string(line_no) + ": non-numeric field");
    }
    first_content = false;
    if (cols == 0) cols = row.size();
    if (row.size() != cols) {
      throw DataError("csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(cols) + " fields");
    }
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw DataError("csv line " + std::to_string(line_no) + ": nonfinite value");
      }
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw DataError("csv: no data rows");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * cols + j];
  return m;
}

Matrix read_matrix_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMatrixMagic, 4) != 0) {
    throw DataError("binary matrix: bad magic");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kMatrixVersion) {
    throw DataError("binary matrix: unsupported version " + std::to_string(version));
  }
  const auto rows = get_le<std::uint64_t>(in);
  const auto cols = get_le<std::uint64_t>(in);
  if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) {
    throw DataError("binary matrix: implausible dimensions");
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::uint64_t i = 0; i < rows; ++i) {
    for (std::uint64_t j = 0; j < cols; ++j) {
      const double v = get_le<double>(in);
      if (!std::isfinite(v)) throw DataError("binary matrix: nonfinite value");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("binary matrix: payload longer than declared dimensions");
  }
  return m;
}

Matrix read_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::memcmp(magic, kMatrixMagic, 4) == 0;
  in.clear();
  in.seekg(0);
  return binary ? read_matrix_binary(in) : read_matrix_csv(in);
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_matrix_binary(std::ostream& out, const Matrix& m) {
  out.write(kMatrixMagic, 4);
  put_le<std::uint32_t>(out, kMatrixVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_le<double>(out, m(i, j));
}

void write_matrix(const std::filesystem::path& path, const Matrix& m, MatrixFormat format) {
  auto out = open_out(path);
  if (format == MatrixFormat::csv) {
    write_matrix_csv(out, m);
  } else {
    write_matrix_binary(out, m);
  }
  if (!out) throw DataError("failed writing " + path.string());
}

nlohmann::json model_to_json(const MixtureModel& model, const nlohmann::json& fit_info) {
  nlohmann::json doc;
  doc["format"] = kModelFormat;
  doc["dim"] = model.dim();
  doc["components"] = nlohmann::json::array();
  for (std::size_t k = 0; k < model.size(); ++k) {
    const auto& c = model.components[k];
    const Matrix& s = c.scatter.matrix();
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index j = 0; j < s.cols(); ++j) flat.push_back(s(i, j));
    doc["components"].push_back({{"weight", model.mix_probs(static_cast<Eigen::Index>(k))},
                                 {"a", c.shape_a},
                                 {"b", c.scale_b},
                                 {"scatter", flat}});
  }
  doc["fit_info"] = fit_info.is_null() ? nlohmann::json::object() : fit_info;
  return doc;
}

ModelFile model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kModelFormat) {
      throw DataError("model file: unsupported format " + doc.at("format").get<std::string>());
    }
    const auto q = doc.at("dim").get<Eigen::Index>();
    if (q < 1) throw DataError("model file: dim must be positive");
    const auto& comps = doc.at("components");
    if (!comps.is_array() || comps.empty()) throw DataError("model file: no components");
    std::vector<EgdParams> params;
    Vector w(static_cast<Eigen::Index>(comps.size()));
    Eigen::Index k = 0;
    for (const auto& c : comps) {
      const auto flat = c.at("scatter").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(flat.size()) != q * q) {
        throw DataError("model file: scatter has wrong size");
      }
      Matrix s(q, q);
      for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j < q; ++j) s(i, j) = flat[static_cast<std::size_t>(i * q + j)];
      try {
        params.emplace_back(ScatterMatrix(s), c.at("a").get<double>(), c.at("b").get<double>());
      } catch (const DomainError& e) {
        throw DataError(std::string("model file: ") + e.what());
      }
      w(k++) = c.at("weight").get<double>();
    }
    if ((w.array() < 0.0).any() || std::abs(w.sum() - 1.0) > 1e-9) {
      throw DataError("model file: weights must be nonnegative and sum to 1");
    }
    ModelFile out{MixtureModel(std::move(params), w / w.sum()),
                  doc.value("fit_info", nlohmann::json::object())};
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void write_model(const std::filesystem::path& path, const MixtureModel& model,
                 const nlohmann::json& fit_info) {
  auto out = open_out(path);
  out << model_to_json(model, fit_info).dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

ModelFile read_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  return model_from_json(doc);
}

void write_fit_trace(std::ostream& out, const FitReport& r, bool with_timing) {
  out << kTraceHeader << '\n';
  const std::size_t n = r.loglik_trace.size();
  for (std::size_t i = 0; i < n; ++i) {
    out << i << ',' << format_double(r.loglik_trace[i]) << ',';
    if (i + 1 == n && std::isfinite(r.final_residual)) out << format_double(r.final_residual);
    out << ',';
    if (i < r.alpha_trace.size()) out << format_double(r.alpha_trace[i]);
    out << ',';
    if (i < r.lambda_max_trace.size()) out << format_double(r.lambda_max_trace[i]);
    out << ',';
    if (i < r.lambda_min_trace.size()) out << format_double(r.lambda_min_trace[i]);
    out << ',';
    if (with_timing && i < r.elapsed_ms.size()) out << format_double(r.elapsed_ms[i]);
    out << '\n';
  }
}

void write_fit_trace(const std::filesystem::path& path, const FitReport& r, bool with_timing) {
  auto out = open_out(path);
  write_fit_trace(out, r, with_timing);
}

void write_em_trace(std::ostream& out, const EmReport& r, bool with_timing) {
  out << kTraceHeader << '\n';
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    out << i << ',' << format_double(r.trace[i].avg_loglik) << ",,,,,";
    if (with_timing) out << format_double(r.trace[i].elapsed_ms);
    out << '\n';
  }
}

void write_em_trace(const std::filesystem::path& path, const EmReport& r, bool with_timing) {
  auto out = open_out(path);
  write_em_trace(out, r, with_timing);
}

}  // namespace egd::io
