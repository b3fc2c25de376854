#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"

#include "egd/mixture.hpp"
#include "egd/scatter_ml.hpp"
#include "egd/types.hpp"

namespace egd::io {

// Binary matrix layout (all little-endian):
//   "EGDM" | u32 version | u64 rows | u64 cols | rows*cols f64, row-major
inline constexpr char kMatrixMagic[4] = {'E', 'G', 'D', 'M'};
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr const char* kModelFormat = "egd-mixture-v1";
inline constexpr const char* kTraceHeader =
    "iter,avg_loglik,residual,alpha,lambda_max,lambda_min,elapsed_ms";

enum class MatrixFormat { csv, binary };

/// csv for a ".csv" extension, binary otherwise.
MatrixFormat format_for_path(const std::filesystem::path& path);

/// Detects the binary magic; anything else is parsed as CSV with an optional
/// single header row. Throws DataError on malformed input or nonfinite values.
Matrix read_matrix(const std::filesystem::path& path);
Matrix read_matrix_csv(std::istream& in);
Matrix read_matrix_binary(std::istream& in);

void write_matrix(const std::filesystem::path& path, const Matrix& m, MatrixFormat format);
void write_matrix_csv(std::ostream& out, const Matrix& m);
void write_matrix_binary(std::ostream& out, const Matrix& m);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

struct ModelFile {
  MixtureModel model;
  nlohmann::json fit_info = nlohmann::json::object();
};

nlohmann::json model_to_json(const MixtureModel& model, const nlohmann::json& fit_info);
/// Validates the format tag, that weights sum to 1 ± 1e-9 and that every
/// scatter is SPD. Weights are renormalized after the check.
ModelFile model_from_json(const nlohmann::json& doc);

void write_model(const std::filesystem::path& path, const MixtureModel& model,
                 const nlohmann::json& fit_info);
ModelFile read_model(const std::filesystem::path& path);

/// One row per iteration; columns that do not apply to the algorithm are
/// left empty. The residual column is filled on the last row only.
void write_fit_trace(std::ostream& out, const FitReport& report, bool with_timing);
void write_fit_trace(const std::filesystem::path& path, const FitReport& report,
                     bool with_timing);

/// One row per EM sweep (row 0 is the initial model).
void write_em_trace(std::ostream& out, const EmReport& report, bool with_timing);
void write_em_trace(const std::filesystem::path& path, const EmReport& report,
                    bool with_timing);

}  // namespace egd::io
