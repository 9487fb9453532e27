#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "oocqr/simd.hpp"
#include "oocqr/tasks.hpp"
#include "oocqr/tile_store.hpp"

namespace oocqr {

enum class Mode { sequential, overlapped };

const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

struct EngineConfig {
  std::size_t tile_size = 10240;
  std::size_t inner_block = 128;
  std::uint64_t cache_budget_bytes = 32ull << 30;
  Mode mode = Mode::sequential;
  unsigned compute_workers = 1;
  unsigned io_agents = 1;
  /// How many tasks ahead the I/O agent prefetches in overlapped mode.
  std::size_t prefetch_depth = 2;
  /// nullptr selects simd::active().
  const simd::Primitives* prims = nullptr;

  /// Throws ConfigError on an inconsistent combination.
  void validate() const;
};

struct TaskTiming {
  std::size_t seq = 0;
  OpKind op = OpKind::CompDenseQR;
  double ms_compute = 0.0;
  double ms_read = 0.0;
  double ms_write = 0.0;
};

struct RunReport {
  Mode mode = Mode::sequential;
  std::size_t tasks = 0;
  double total_seconds = 0.0;
  double compute_seconds = 0.0;
  double io_read_seconds = 0.0;
  double io_write_seconds = 0.0;
  /// Time the coordinator spent blocked on the I/O agent (overlapped mode).
  double stall_seconds = 0.0;
  std::uint64_t tiles_read = 0;
  std::uint64_t tiles_written = 0;
  std::uint64_t cache_hits = 0;
  std::vector<TaskTiming> trace;

  RunReport& operator+=(const RunReport& o);
  void write_key_value(std::ostream& os) const;
  void write_trace_csv(std::ostream& os) const;
};

/// The three tile grids a task list refers to. `b` may be null for
/// factorization-only lists.
struct MatrixSet {
  const TiledMatrix* a = nullptr;
  const TiledMatrix* s = nullptr;
  const TiledMatrix* b = nullptr;
};

/// Runs the tasks in list order through a fresh tile cache and flushes it.
/// In overlapped mode one I/O agent prefetches inputs of upcoming tasks and
/// writes back evicted tiles while compute proceeds; results are bitwise
/// identical to sequential mode. I/O failures surface as TaskIoError.
RunReport execute(const std::vector<Task>& tasks, const MatrixSet& mats, const EngineConfig& cfg);

struct QrFactors {
  TiledMatrix qr;  // R on and above the diagonal, reflectors below
  TiledMatrix s;   // packed S factors, tile (i, j) for i >= j
};

/// Directory layout of persisted factors: <dir>/QR and <dir>/S.
bool factors_exist(const std::filesystem::path& dir);
QrFactors open_factors(const std::filesystem::path& dir);

/// Copies A's tiles into <dir>/QR and factorizes the copy in place.
QrFactors factorize(const TiledMatrix& a, const std::filesystem::path& dir, const EngineConfig& cfg,
                    RunReport* report = nullptr);

/// X = R^-1 (Q^T B) for every column of B, written to `x_dir` (N x B.cols).
/// B itself is left untouched; a scratch copy lives next to `x_dir` during
/// the solve.
TiledMatrix solve(const QrFactors& f, const TiledMatrix& b, const std::filesystem::path& x_dir,
                  const EngineConfig& cfg, RunReport* report = nullptr);

}  // namespace oocqr
