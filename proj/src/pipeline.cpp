#include "oocqr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "oocqr/engine.hpp"
#include "oocqr/image_io.hpp"
#include "oocqr/phantom.hpp"
#include "oocqr/projector.hpp"
#include "oocqr/tile_store.hpp"

namespace oocqr {

namespace fs = std::filesystem;

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const FactorsExistError&) {
    return kExitFactorsExist;
  } catch (const SingularMatrixError&) {
    return kExitSingular;
  } catch (const ConfigError&) {
    return kExitConfig;
  } catch (const IoError&) {
    return kExitIo;
  } catch (const fs::filesystem_error&) {
    return kExitIo;
  } catch (...) {
    return kExitOther;
  }
}

void write_geometry_stamp(const fs::path& dir, const ScannerGeometry& g) {
  std::ofstream out(dir / "geometry.txt");
  if (!out) throw IoError("cannot write " + (dir / "geometry.txt").string());
  out << "hash=" << g.hash() << '\n' << "geometry=" << g.canonical() << '\n';
}

void check_geometry_stamp(const fs::path& dir, const ScannerGeometry& g) {
  std::ifstream in(dir / "geometry.txt");
  if (!in) throw GeometryMismatchError(dir.string() + " has no geometry stamp; rebuild it");
  std::string line, hash;
  while (std::getline(in, line))
    if (line.rfind("hash=", 0) == 0) hash = line.substr(5);
  if (hash != g.hash())
    throw GeometryMismatchError(dir.string() + " was built for geometry " + hash +
                                ", config describes " + g.hash() + "; rebuild it");
}

namespace {

ScannerGeometry checked_geometry(const PipelineConfig& cfg) {
  cfg.validate();
  return cfg.scanner();
}

TiledMatrix open_stamped(const fs::path& dir, const ScannerGeometry& g, const char* producer) {
  if (!TiledMatrix::exists(dir))
    throw IoError(dir.string() + " does not exist; run '" + producer + "' first");
  check_geometry_stamp(dir, g);
  return TiledMatrix::open(dir);
}

Phantom load_or_default_phantom(const PipelineConfig& cfg, const ScannerGeometry& g) {
  return cfg.phantom.empty() ? shepp_logan(g.fov()) : load_phantom(cfg.phantom);
}

// Reference stack (N x slices) from the configured image or phantom.
std::vector<double> reference_stack(const PipelineConfig& cfg, const ScannerGeometry& g,
                                    std::size_t slices) {
  if (!cfg.image.empty()) {
    std::size_t n = 0;
    auto img = ingest_image(cfg.image, &n);
    if (n != g.n)
      throw ConfigError("image " + cfg.image.string() + " is " + std::to_string(n) + "x" +
                        std::to_string(n) + ", config n is " + std::to_string(g.n));
    std::vector<double> stack;
    for (std::size_t s = 0; s < slices; ++s) stack.insert(stack.end(), img.begin(), img.end());
    return stack;
  }
  return rasterize_stack(load_or_default_phantom(cfg, g), g.n, g.fov(), slices);
}

TiledMatrix write_sinogram(const fs::path& dir, const ScannerGeometry& g, std::size_t tile,
                           const std::vector<double>& reference, std::size_t slices) {
  auto angles = angle_schedule(g.views, g.interpretation);
  auto sino = forward_project_stack(g, angles, reference, slices);
  fs::remove_all(dir);
  TiledMatrix b = TiledMatrix::create(g.rows(), slices, tile, dir);
  scatter(b, sino);
  write_geometry_stamp(dir, g);
  return b;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string report_text(const RunReport& r) {
  std::ostringstream os;
  r.write_key_value(os);
  return os.str();
}

std::string trace_text(const RunReport& r) {
  std::ostringstream os;
  r.write_trace_csv(os);
  return os.str();
}

}  // namespace

void cmd_build_matrix(const PipelineConfig& cfg, std::ostream& log) {
  const ScannerGeometry g = checked_geometry(cfg);
  const fs::path dir = cfg.matrix_dir();
  fs::remove_all(dir);
  fs::create_directories(cfg.work_dir);
  TiledMatrix a = TiledMatrix::create(g.rows(), g.cols(), cfg.tile_size, dir);
  auto angles = angle_schedule(g.views, g.interpretation);
  auto t0 = std::chrono::steady_clock::now();
  const std::size_t written = assemble_system_matrix(g, angles, a);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_geometry_stamp(dir, g);
  log << "system matrix " << a.rows() << " x " << a.cols() << " (detectors=" << g.detectors
      << " views=" << g.views << " n=" << g.n << " fov=" << g.fov() << "cm)\n"
      << "tile grid " << a.grid_rows() << " x " << a.grid_cols() << " of " << a.tile_size()
      << ", " << written << " nonzero tiles written in " << secs << " s\n"
      << "stored in " << dir.string() << '\n';
}

void cmd_factorize(const PipelineConfig& cfg, bool force, std::ostream& log) {
  const ScannerGeometry g = checked_geometry(cfg);
  TiledMatrix a = open_stamped(cfg.matrix_dir(), g, "build-matrix");
  const fs::path dir = cfg.factors_dir();
  if (factors_exist(dir) && !force)
    throw FactorsExistError("factors already exist in " + dir.string() +
                            "; pass --force to recompute them");
  RunReport rep;
  factorize(a, dir, cfg.engine(), &rep);
  write_geometry_stamp(dir, g);
  write_text(dir / "factorize_report.txt", report_text(rep));
  write_text(dir / "factorize_trace.csv", trace_text(rep));
  log << "factorized " << a.rows() << " x " << a.cols() << " as " << a.grid_rows() << " x "
      << a.grid_cols() << " tiles (" << rep.tasks << " tasks, mode " << mode_name(rep.mode) << ")\n"
      << "total " << rep.total_seconds << " s: compute " << rep.compute_seconds << " s, read "
      << rep.io_read_seconds << " s, write " << rep.io_write_seconds << " s\n"
      << "tiles read " << rep.tiles_read << ", written " << rep.tiles_written << ", cache hits "
      << rep.cache_hits << '\n';
}

void cmd_project(const PipelineConfig& cfg, std::ostream& log) {
  const ScannerGeometry g = checked_geometry(cfg);
  const std::size_t slices = cfg.image.empty() ? cfg.slice_count() : 1;
  fs::create_directories(cfg.work_dir);
  auto ref = reference_stack(cfg, g, slices);
  fs::remove_all(cfg.reference_dir());
  TiledMatrix r = TiledMatrix::create(g.cols(), slices, cfg.tile_size, cfg.reference_dir());
  scatter(r, ref);
  write_geometry_stamp(cfg.reference_dir(), g);
  TiledMatrix b = write_sinogram(cfg.sinogram_dir(), g, cfg.tile_size, ref, slices);
  log << "projected " << slices << " slice(s) of " << g.n << "x" << g.n << " into a "
      << b.rows() << " x " << b.cols() << " sinogram (" << cfg.sinogram_dir().string() << ")\n";
}

SolveSummary cmd_solve(const PipelineConfig& cfg, std::ostream& log) {
  const ScannerGeometry g = checked_geometry(cfg);
  if (!factors_exist(cfg.factors_dir()))
    throw IoError("no factors in " + cfg.factors_dir().string() + "; run 'factorize' first");
  check_geometry_stamp(cfg.factors_dir(), g);
  QrFactors f = open_factors(cfg.factors_dir());
  TiledMatrix b = open_stamped(cfg.sinogram_dir(), g, "project");
  TiledMatrix a = open_stamped(cfg.matrix_dir(), g, "build-matrix");

  SolveSummary sum;
  sum.slices = b.cols();
  TiledMatrix x = solve(f, b, cfg.solution_dir(), cfg.engine(), &sum.run);
  write_geometry_stamp(cfg.solution_dir(), g);
  sum.per_slice_seconds = sum.run.total_seconds / static_cast<double>(sum.slices);
  sum.residual = relative_residual(a, x, b);

  const fs::path out = cfg.output_dir();
  fs::create_directories(out);
  std::vector<double> rec = gather(x);

  std::vector<double> ref;
  if (TiledMatrix::exists(cfg.reference_dir())) {
    ref = gather(open_stamped(cfg.reference_dir(), g, "project"));
    if (ref.size() == rec.size()) {
      SsimParams sp;
      sp.window = cfg.ssim_window;
      sum.quality = score_stack(ref, rec, g.n, sum.slices, sp);
    }
  }
  const std::size_t N = g.cols();
  for (std::size_t s = 0; s < sum.slices; ++s) {
    std::span<const double> img(rec.data() + s * N, N);
    double hi = 0.0;
    for (double v : (ref.size() == rec.size() ? std::span<const double>(ref.data() + s * N, N) : img))
      hi = std::max(hi, v);
    char name[32];
    std::snprintf(name, sizeof name, "slice_%04zu.pgm", s);
    write_pgm(out / name, img, g.n, g.n, 16, 0.0, hi > 0.0 ? hi : 1.0);
  }

  std::ostringstream rep;
  sum.run.write_key_value(rep);
  rep << "slices=" << sum.slices << '\n'
      << "per_slice_seconds=" << sum.per_slice_seconds << '\n'
      << "relative_residual=" << sum.residual << '\n';
  if (sum.quality) {
    sum.quality->write_key_value(rep);
    std::ostringstream q;
    sum.quality->write_csv(q);
    write_text(out / "quality.csv", q.str());
  }
  write_text(out / "solve_report.txt", rep.str());
  write_text(out / "solve_trace.csv", trace_text(sum.run));

  log << "solved " << sum.slices << " slice(s) in " << sum.run.total_seconds << " s ("
      << sum.per_slice_seconds << " s/slice, mode " << mode_name(sum.run.mode) << ")\n"
      << "relative residual " << sum.residual << '\n';
  if (sum.quality)
    log << "average PSNR " << sum.quality->avg_psnr << " dB, SSIM " << sum.quality->avg_ssim
        << '\n';
  log << "images and reports in " << out.string() << '\n';
  return sum;
}

void cmd_metrics(const PipelineConfig& cfg, std::ostream& log) {
  const ScannerGeometry g = checked_geometry(cfg);
  const fs::path out = cfg.output_dir();
  fs::create_directories(out);
  auto ref = gather(open_stamped(cfg.reference_dir(), g, "project"));
  auto rec = gather(open_stamped(cfg.solution_dir(), g, "solve"));
  const std::size_t N = g.cols();
  if (ref.size() != rec.size() || ref.size() % N != 0)
    throw FormatError("reference and reconstruction stacks do not match n^2 x slices");
  SsimParams sp;
  sp.window = cfg.ssim_window;
  QualityReport q = score_stack(ref, rec, g.n, ref.size() / N, sp);
  std::ostringstream csv;
  q.write_csv(csv);
  write_text(out / "quality.csv", csv.str());
  q.write_key_value(log);
  if (TiledMatrix::exists(cfg.matrix_dir()) && TiledMatrix::exists(cfg.solution_dir()) &&
      TiledMatrix::exists(cfg.sinogram_dir())) {
    TiledMatrix a = open_stamped(cfg.matrix_dir(), g, "build-matrix");
    TiledMatrix x = open_stamped(cfg.solution_dir(), g, "solve");
    TiledMatrix b = open_stamped(cfg.sinogram_dir(), g, "project");
    log << "relative_residual=" << relative_residual(a, x, b) << '\n';
  }
}

void cmd_bench(const PipelineConfig& cfg, std::ostream& log) {
  const ScannerGeometry g = checked_geometry(cfg);
  if (!factors_exist(cfg.factors_dir()))
    throw IoError("no factors in " + cfg.factors_dir().string() + "; run 'factorize' first");
  check_geometry_stamp(cfg.factors_dir(), g);
  QrFactors f = open_factors(cfg.factors_dir());
  const fs::path bench = cfg.work_dir / "bench";
  fs::create_directories(cfg.output_dir());

  std::ostringstream csv;
  csv << "mode,slices,total_seconds,per_slice_seconds,compute_seconds,io_read_seconds,"
         "io_write_seconds,tiles_read,tiles_written,cache_hits\n";
  for (std::size_t slices : cfg.bench_slices) {
    auto ref = reference_stack(cfg, g, slices);
    TiledMatrix b = write_sinogram(bench / "B", g, cfg.tile_size, ref, slices);
    for (Mode mode : {Mode::sequential, Mode::overlapped}) {
      EngineConfig ec = cfg.engine();
      ec.mode = mode;
      RunReport rep;
      solve(f, b, bench / "X", ec, &rep);
      const double per = rep.total_seconds / static_cast<double>(slices);
      csv << mode_name(mode) << ',' << slices << ',' << rep.total_seconds << ',' << per << ','
          << rep.compute_seconds << ',' << rep.io_read_seconds << ',' << rep.io_write_seconds << ','
          << rep.tiles_read << ',' << rep.tiles_written << ',' << rep.cache_hits << '\n';
      log << mode_name(mode) << " slices=" << slices << " per_slice=" << per << " s\n";
    }
  }
  fs::remove_all(bench);
  write_text(cfg.output_dir() / "bench.csv", csv.str());
  log << "wrote " << (cfg.output_dir() / "bench.csv").string() << '\n';
}

}  // namespace oocqr
