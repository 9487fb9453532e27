#pragma once

// The reconstruction workflow: build the system matrix, factorize it once,
// project reference slices into sinograms, and solve for every slice.
// All artifacts live under PipelineConfig::work_dir:
//   A/          system matrix tiles            factors/QR, factors/S
//   B/          sinogram tiles (M x slices)    X/  solution tiles (N x slices)
//   reference/  reference images (N x slices)  out/  images and reports
// Tile directories produced here carry geometry.txt with the geometry hash;
// commands refuse inputs built for a different geometry.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>

#include "oocqr/config.hpp"
#include "oocqr/errors.hpp"
#include "oocqr/metrics.hpp"

namespace oocqr {

/// Factors are already on disk and overwriting was not requested.
class FactorsExistError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An artifact was built for a different scanner geometry than the config's.
class GeometryMismatchError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitSingular = 4,
  kExitFactorsExist = 5,
};

/// Maps the exception currently being handled to an exit code.
int exit_code_for_current_exception();

void write_geometry_stamp(const std::filesystem::path& dir, const ScannerGeometry& g);
/// Throws GeometryMismatchError when the stamp is missing or differs.
void check_geometry_stamp(const std::filesystem::path& dir, const ScannerGeometry& g);

void cmd_build_matrix(const PipelineConfig& cfg, std::ostream& log);
void cmd_factorize(const PipelineConfig& cfg, bool force, std::ostream& log);
void cmd_project(const PipelineConfig& cfg, std::ostream& log);

struct SolveSummary {
  std::size_t slices = 0;
  RunReport run;
  double per_slice_seconds = 0.0;
  double residual = 0.0;
  std::optional<QualityReport> quality;
};

SolveSummary cmd_solve(const PipelineConfig& cfg, std::ostream& log);
void cmd_metrics(const PipelineConfig& cfg, std::ostream& log);
void cmd_bench(const PipelineConfig& cfg, std::ostream& log);

}  // namespace oocqr
