#include "oocqr/engine.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <memory>
#include <ostream>
#include <span>

#include "oocqr/errors.hpp"
#include "oocqr/io_agent.hpp"
#include "oocqr/kernels.hpp"

namespace oocqr {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr std::size_t kMaxTilesPerTask = 4;
constexpr const char* kFactorsDone = "factors.done";

}  // namespace

const char* mode_name(Mode m) { return m == Mode::sequential ? "sequential" : "overlapped"; }

Mode parse_mode(const std::string& s) {
  if (s == "sequential") return Mode::sequential;
  if (s == "overlapped") return Mode::overlapped;
  throw ConfigError("unknown mode '" + s + "' (expected sequential or overlapped)");
}

void EngineConfig::validate() const {
  if (tile_size == 0) throw ConfigError("tile_size must be positive");
  if (inner_block == 0 || inner_block > tile_size)
    throw ConfigError("inner_block must satisfy 1 <= inner_block <= tile_size");
  if (compute_workers == 0) throw ConfigError("compute_workers must be at least 1");
  if (mode == Mode::overlapped && io_agents != 1)
    throw ConfigError("overlapped mode requires exactly one I/O agent");
  if (TileCache::capacity_for_budget(cache_budget_bytes, tile_size) < kMaxTilesPerTask)
    throw ConfigError("cache budget must hold at least 4 tiles of size " + std::to_string(tile_size));
}

RunReport& RunReport::operator+=(const RunReport& o) {
  tasks += o.tasks;
  total_seconds += o.total_seconds;
  compute_seconds += o.compute_seconds;
  io_read_seconds += o.io_read_seconds;
  io_write_seconds += o.io_write_seconds;
  stall_seconds += o.stall_seconds;
  tiles_read += o.tiles_read;
  tiles_written += o.tiles_written;
  cache_hits += o.cache_hits;
  trace.insert(trace.end(), o.trace.begin(), o.trace.end());
  return *this;
}

void RunReport::write_key_value(std::ostream& os) const {
  os << "mode=" << mode_name(mode) << '\n'
     << "tasks=" << tasks << '\n'
     << "total_seconds=" << total_seconds << '\n'
     << "compute_seconds=" << compute_seconds << '\n'
     << "io_read_seconds=" << io_read_seconds << '\n'
     << "io_write_seconds=" << io_write_seconds << '\n'
     << "stall_seconds=" << stall_seconds << '\n'
     << "tiles_read=" << tiles_read << '\n'
     << "tiles_written=" << tiles_written << '\n'
     << "cache_hits=" << cache_hits << '\n';
}

void RunReport::write_trace_csv(std::ostream& os) const {
  os << "seq,op,ms_compute,ms_read,ms_write\n";
  for (const TaskTiming& t : trace)
    os << t.seq << ',' << op_name(t.op) << ',' << t.ms_compute << ',' << t.ms_read << ','
       << t.ms_write << '\n';
}

namespace {

class Runner {
 public:
  Runner(const std::vector<Task>& tasks, const MatrixSet& mats, const EngineConfig& cfg)
      : tasks_(tasks), mats_(mats), cfg_(cfg) {
    kcfg_.tile_size = cfg.tile_size;
    kcfg_.inner_block = cfg.inner_block;
    kcfg_.workers = cfg.compute_workers;
    kcfg_.prims = cfg.prims;
    if (cfg.mode == Mode::overlapped) agent_ = std::make_unique<IoAgent>();
    cache_ = std::make_unique<TileCache>(
        TileCache::capacity_for_budget(cfg.cache_budget_bytes, cfg.tile_size), agent_.get());
  }

  ~Runner() {
    // The cache must release its agent work before the agent goes away.
    cache_.reset();
  }

  RunReport run() {
    RunReport rep;
    rep.mode = cfg_.mode;
    rep.tasks = tasks_.size();
    auto t_start = Clock::now();
    for (const Task& t : tasks_) {
      try {
        rep.trace.push_back(run_task(t));
      } catch (const TaskIoError&) {
        throw;
      } catch (const IoError& e) {
        throw TaskIoError(t.seq, e.what());
      }
      rep.compute_seconds += rep.trace.back().ms_compute / 1e3;
    }
    try {
      cache_->flush();
      cache_->drain();
    } catch (const IoError& e) {
      throw TaskIoError(tasks_.empty() ? 0 : tasks_.back().seq, e.what());
    }
    rep.total_seconds = seconds_since(t_start);
    CacheCounters c = cache_->counters();
    rep.io_read_seconds = c.read_seconds;
    rep.io_write_seconds = c.write_seconds;
    rep.stall_seconds = c.read_stall_seconds + c.write_stall_seconds;
    rep.tiles_read = c.reads_from_disk;
    rep.tiles_written = c.writes_to_disk;
    rep.cache_hits = c.hits;
    return rep;
  }

 private:
  const TiledMatrix& matrix(const TileRef& r) const {
    const TiledMatrix* m = r.role == Role::A ? mats_.a : r.role == Role::S ? mats_.s : mats_.b;
    if (!m) throw std::invalid_argument("task refers to a matrix that was not supplied");
    return *m;
  }

  static bool writes(const Task& t, const TileRef& r) {
    return std::find(t.out.begin(), t.out.end(), r) != t.out.end();
  }

  void prefetch_ahead(std::size_t pos) {
    const std::size_t last = std::min(tasks_.size() - 1, pos + cfg_.prefetch_depth);
    for (std::size_t u = pos + 1; u <= last; ++u)
      for (const TileRef& r : tasks_[u].in) {
        bool changes = false;
        for (std::size_t v = pos; v < u && !changes; ++v) changes = writes(tasks_[v], r);
        if (!changes) cache_->prefetch(matrix(r), r.id);
      }
  }

  TaskTiming run_task(const Task& t) {
    const CacheCounters before = cache_->counters();
    const std::size_t pos = static_cast<std::size_t>(&t - tasks_.data());

    std::vector<TileRef> tiles;
    for (const auto* list : {&t.in, &t.out})
      for (const TileRef& r : *list)
        if (std::find(tiles.begin(), tiles.end(), r) == tiles.end()) tiles.push_back(r);

    std::vector<double*> ptrs;
    ptrs.reserve(tiles.size());
    for (const TileRef& r : tiles) {
      bool is_input = std::find(t.in.begin(), t.in.end(), r) != t.in.end();
      ptrs.push_back(cache_->pin(matrix(r), r.id, is_input ? Access::read : Access::overwrite));
    }
    if (agent_) prefetch_ahead(pos);

    auto tile = [&](const TileRef& r) {
      auto i = std::find(tiles.begin(), tiles.end(), r) - tiles.begin();
      return std::span<double>(ptrs[static_cast<std::size_t>(i)], cfg_.tile_size * cfg_.tile_size);
    };

    auto t0 = Clock::now();
    compute(t, tile);
    const double compute_s = seconds_since(t0);

    for (const TileRef& r : t.out) cache_->mark_dirty(matrix(r), r.id);
    for (const TileRef& r : tiles) cache_->unpin(matrix(r), r.id);

    const CacheCounters after = cache_->counters();
    TaskTiming tm;
    tm.seq = t.seq;
    tm.op = t.op;
    tm.ms_compute = compute_s * 1e3;
    if (agent_) {
      tm.ms_read = (after.read_stall_seconds - before.read_stall_seconds) * 1e3;
      tm.ms_write = (after.write_stall_seconds - before.write_stall_seconds) * 1e3;
    } else {
      tm.ms_read = (after.read_seconds - before.read_seconds) * 1e3;
      tm.ms_write = (after.write_seconds - before.write_seconds) * 1e3;
    }
    return tm;
  }

  template <class TileFn>
  void compute(const Task& t, TileFn&& tile) {
    using namespace kernels;
    const TiledMatrix& a = *mats_.a;
    auto cols_of = [&](const TileRef& r) { return matrix(r).cols_in(r.id.col_block); };
    switch (t.op) {
      case OpKind::CompDenseQR:
        comp_dense_qr(tile(t.out[0]), tile(t.out[1]), kcfg_, cols_of(t.in[0]));
        break;
      case OpKind::CompTdQR:
        comp_td_qr(tile(t.out[0]), tile(t.out[1]), tile(t.out[2]), kcfg_, cols_of(t.in[0]));
        break;
      case OpKind::ApplyQtDense:
        apply_left_qt_dense(tile(t.in[0]), tile(t.in[1]), tile(t.in[2]), kcfg_,
                            a.cols_in(t.in[0].id.col_block), cols_of(t.in[2]));
        break;
      case OpKind::ApplyQtTD:
        apply_left_qt_td(tile(t.in[0]), tile(t.in[1]), tile(t.in[2]), tile(t.in[3]), kcfg_,
                         a.cols_in(t.in[0].id.col_block), cols_of(t.in[2]));
        break;
      case OpKind::TrsmLunn: {
        const std::size_t k = t.in[0].id.col_block;
        trsm_lunn(tile(t.in[0]), tile(t.in[1]), kcfg_, a.cols_in(k), cols_of(t.in[1]),
                  k * a.tile_size());
        break;
      }
      case OpKind::GemmNnMo:
        gemm_nn_mo(tile(t.in[0]), tile(t.in[1]), tile(t.in[2]), kcfg_, cols_of(t.in[0]));
        break;
    }
  }

  const std::vector<Task>& tasks_;
  MatrixSet mats_;
  EngineConfig cfg_;
  kernels::KernelConfig kcfg_;
  std::unique_ptr<IoAgent> agent_;
  std::unique_ptr<TileCache> cache_;
};

void check_tile_size(const TiledMatrix* m, const EngineConfig& cfg) {
  if (m && m->tile_size() != cfg.tile_size)
    throw ConfigError("matrix in " + m->dir().string() + " has tile size " +
                      std::to_string(m->tile_size()) + ", engine configured for " +
                      std::to_string(cfg.tile_size));
}

}  // namespace

RunReport execute(const std::vector<Task>& tasks, const MatrixSet& mats, const EngineConfig& cfg) {
  cfg.validate();
  if (tasks.empty()) {
    RunReport rep;
    rep.mode = cfg.mode;
    return rep;
  }
  if (!mats.a) throw std::invalid_argument("execute: matrix A is required");
  for (const TiledMatrix* m : {mats.a, mats.s, mats.b}) check_tile_size(m, cfg);
  Runner runner(tasks, mats, cfg);
  return runner.run();
}

bool factors_exist(const fs::path& dir) {
  return fs::exists(dir / kFactorsDone) && TiledMatrix::exists(dir / "QR") &&
         TiledMatrix::exists(dir / "S");
}

QrFactors open_factors(const fs::path& dir) {
  if (!factors_exist(dir))
    throw IoError("no complete factorization in " + dir.string() + " (run factorize first)");
  return QrFactors{TiledMatrix::open(dir / "QR"), TiledMatrix::open(dir / "S")};
}

QrFactors factorize(const TiledMatrix& a, const fs::path& dir, const EngineConfig& cfg,
                    RunReport* report) {
  cfg.validate();
  if (a.rows() < a.cols()) throw std::invalid_argument("factorize needs rows >= cols");
  check_tile_size(&a, cfg);
  fs::create_directories(dir);
  fs::remove(dir / kFactorsDone);
  fs::remove_all(dir / "QR");
  fs::remove_all(dir / "S");

  const std::size_t b = a.tile_size();
  QrFactors f{TiledMatrix::create(a.rows(), a.cols(), b, dir / "QR"),
              TiledMatrix::create(a.grid_rows() * b, a.grid_cols() * b, b, dir / "S")};
  copy_tiles(a, f.qr);

  auto tasks = gen_factorization_tasks(a.grid_rows(), a.grid_cols());
  RunReport rep = execute(tasks, MatrixSet{&f.qr, &f.s, nullptr}, cfg);
  std::ofstream(dir / kFactorsDone) << "tasks=" << tasks.size() << '\n';
  if (report) *report = std::move(rep);
  return f;
}

TiledMatrix solve(const QrFactors& f, const TiledMatrix& b, const fs::path& x_dir,
                  const EngineConfig& cfg, RunReport* report) {
  cfg.validate();
  if (b.rows() != f.qr.rows())
    throw std::invalid_argument("right-hand side has " + std::to_string(b.rows()) +
                                " rows, factored matrix has " + std::to_string(f.qr.rows()));
  if (b.tile_size() != f.qr.tile_size())
    throw std::invalid_argument("right-hand side and factors use different tile sizes");

  fs::path work_dir = x_dir;
  work_dir += ".work";
  fs::remove_all(work_dir);
  fs::remove_all(x_dir);
  TiledMatrix work = TiledMatrix::create(b.rows(), b.cols(), b.tile_size(), work_dir);
  copy_tiles(b, work);

  const std::size_t q = f.qr.grid_cols();
  auto tasks = gen_solve_tasks(f.qr.grid_rows(), q, b.grid_cols());
  RunReport rep = execute(tasks, MatrixSet{&f.qr, &f.s, &work}, cfg);

  TiledMatrix x = TiledMatrix::create(f.qr.cols(), b.cols(), b.tile_size(), x_dir);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t c = 0; c < x.grid_cols(); ++c)
      if (work.has_tile({i, c})) fs::copy_file(work.tile_path({i, c}), x.tile_path({i, c}));
  fs::remove_all(work_dir);
  if (report) *report = std::move(rep);
  return x;
}

}  // namespace oocqr
