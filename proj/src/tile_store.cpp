#include "oocqr/tile_store.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <system_error>

#include "oocqr/errors.hpp"
#include "oocqr/io_agent.hpp"

namespace fs = std::filesystem;

namespace oocqr {

static_assert(std::endian::native == std::endian::little,
              "tile files are little-endian float64; big-endian hosts are not supported");

namespace {

constexpr const char* kManifestName = "manifest.txt";
constexpr const char* kElementType = "float64_le";
constexpr const char* kLayout = "column_major";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::map<std::string, std::string> read_manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw IoError("cannot open manifest in " + dir.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed manifest line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::size_t manifest_size(const std::map<std::string, std::string>& kv, const std::string& key,
                          const fs::path& dir) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("manifest in " + dir.string() + " lacks " + key);
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw FormatError("manifest in " + dir.string() + " has bad " + key + "=" + it->second);
  }
}

}  // namespace

std::string to_string(const TileId& id) {
  return "(" + std::to_string(id.row_block) + "," + std::to_string(id.col_block) + ")";
}

// ---------------------------------------------------------------------------
// TiledMatrix

TiledMatrix TiledMatrix::create(std::size_t rows, std::size_t cols, std::size_t tile_size,
                                const fs::path& dir) {
  if (rows == 0 || cols == 0 || tile_size == 0)
    throw ConfigError("tiled matrix dimensions and tile size must be positive");

  TiledMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.tile_size_ = tile_size;
  m.grid_rows_ = ceil_div(rows, tile_size);
  m.grid_cols_ = ceil_div(cols, tile_size);
  m.dir_ = dir;

  if (exists(dir)) {
    TiledMatrix old = open(dir);
    if (old.rows_ != rows || old.cols_ != cols || old.tile_size_ != tile_size)
      throw FormatError("incompatible manifest already present in " + dir.string());
    return old;
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  fs::path tmp = dir / "manifest.txt.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("directory not writable: " + dir.string());
    out << "format_version=" << kTileFormatVersion << '\n'
        << "element_type=" << kElementType << '\n'
        << "layout=" << kLayout << '\n'
        << "rows=" << rows << '\n'
        << "cols=" << cols << '\n'
        << "tile_size=" << tile_size << '\n'
        << "grid_rows=" << m.grid_rows_ << '\n'
        << "grid_cols=" << m.grid_cols_ << '\n';
    if (!out) throw IoError("failed writing manifest in " + dir.string());
  }
  fs::rename(tmp, dir / kManifestName, ec);
  if (ec) throw IoError("cannot install manifest in " + dir.string() + ": " + ec.message());
  return m;
}

TiledMatrix TiledMatrix::open(const fs::path& dir) {
  auto kv = read_manifest(dir);
  if (manifest_size(kv, "format_version", dir) != kTileFormatVersion)
    throw FormatError("unsupported tile format version in " + dir.string());
  if (kv["element_type"] != kElementType || kv["layout"] != kLayout)
    throw FormatError("unsupported element type or layout in " + dir.string());

  TiledMatrix m;
  m.rows_ = manifest_size(kv, "rows", dir);
  m.cols_ = manifest_size(kv, "cols", dir);
  m.tile_size_ = manifest_size(kv, "tile_size", dir);
  if (m.rows_ == 0 || m.cols_ == 0 || m.tile_size_ == 0)
    throw FormatError("manifest in " + dir.string() + " has zero dimension");
  m.grid_rows_ = ceil_div(m.rows_, m.tile_size_);
  m.grid_cols_ = ceil_div(m.cols_, m.tile_size_);
  if (kv.count("grid_rows") && manifest_size(kv, "grid_rows", dir) != m.grid_rows_)
    throw FormatError("manifest grid_rows inconsistent in " + dir.string());
  if (kv.count("grid_cols") && manifest_size(kv, "grid_cols", dir) != m.grid_cols_)
    throw FormatError("manifest grid_cols inconsistent in " + dir.string());
  m.dir_ = dir;
  return m;
}

bool TiledMatrix::exists(const fs::path& dir) { return fs::exists(dir / kManifestName); }

std::size_t TiledMatrix::rows_in(std::size_t row_block) const {
  return std::min(tile_size_, rows_ - row_block * tile_size_);
}

std::size_t TiledMatrix::cols_in(std::size_t col_block) const {
  return std::min(tile_size_, cols_ - col_block * tile_size_);
}

void TiledMatrix::check(TileId id) const {
  if (!contains(id))
    throw std::out_of_range("tile " + to_string(id) + " outside grid of " + dir_.string());
}

fs::path TiledMatrix::tile_path(TileId id) const {
  return dir_ / ("t_" + std::to_string(id.row_block) + "_" + std::to_string(id.col_block) + ".blk");
}

bool TiledMatrix::has_tile(TileId id) const {
  check(id);
  return fs::exists(tile_path(id));
}

void TiledMatrix::load(TileId id, std::span<double> out) const {
  check(id);
  if (out.size() != tile_elems()) throw std::invalid_argument("tile buffer size mismatch");
  fs::path path = tile_path(id);
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) {
    if (!fs::exists(path)) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    throw IoError("cannot open " + path.string());
  }
  std::size_t got = std::fread(out.data(), sizeof(double), out.size(), f);
  bool trailing = got == out.size() && std::fgetc(f) != EOF;
  bool err = std::ferror(f) != 0;
  std::fclose(f);
  if (err) throw IoError("read failed: " + path.string());
  if (got != out.size() || trailing)
    throw FormatError("corrupt tile " + path.string() + ": size does not match tile_size " +
                      std::to_string(tile_size_));
}

void TiledMatrix::store(TileId id, std::span<const double> tile) const {
  check(id);
  if (tile.size() != tile_elems()) throw std::invalid_argument("tile buffer size mismatch");
  fs::path path = tile_path(id);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot write " + path.string());
  std::size_t put = std::fwrite(tile.data(), sizeof(double), tile.size(), f);
  bool ok = put == tile.size();
  ok = (std::fclose(f) == 0) && ok;
  if (!ok) throw IoError("write failed: " + path.string());
}

void TiledMatrix::clear_tiles() const {
  for (std::size_t i = 0; i < grid_rows_; ++i)
    for (std::size_t j = 0; j < grid_cols_; ++j) {
      std::error_code ec;
      fs::remove(tile_path({i, j}), ec);
    }
}

void scatter(const TiledMatrix& m, std::span<const double> dense) {
  if (dense.size() != m.rows() * m.cols()) throw std::invalid_argument("scatter: size mismatch");
  const std::size_t b = m.tile_size();
  std::vector<double> tile(m.tile_elems());
  for (std::size_t bi = 0; bi < m.grid_rows(); ++bi)
    for (std::size_t bj = 0; bj < m.grid_cols(); ++bj) {
      std::fill(tile.begin(), tile.end(), 0.0);
      bool nonzero = false;
      for (std::size_t j = 0; j < m.cols_in(bj); ++j)
        for (std::size_t i = 0; i < m.rows_in(bi); ++i) {
          double v = dense[(bj * b + j) * m.rows() + bi * b + i];
          tile[j * b + i] = v;
          nonzero = nonzero || v != 0.0;
        }
      if (nonzero)
        m.store({bi, bj}, tile);
      else {
        std::error_code ec;
        fs::remove(m.tile_path({bi, bj}), ec);
      }
    }
}

std::vector<double> gather(const TiledMatrix& m) {
  const std::size_t b = m.tile_size();
  std::vector<double> dense(m.rows() * m.cols());
  std::vector<double> tile(m.tile_elems());
  for (std::size_t bi = 0; bi < m.grid_rows(); ++bi)
    for (std::size_t bj = 0; bj < m.grid_cols(); ++bj) {
      m.load({bi, bj}, tile);
      for (std::size_t j = 0; j < m.cols_in(bj); ++j)
        for (std::size_t i = 0; i < m.rows_in(bi); ++i)
          dense[(bj * b + j) * m.rows() + bi * b + i] = tile[j * b + i];
    }
  return dense;
}

void copy_tiles(const TiledMatrix& src, const TiledMatrix& dst) {
  if (src.rows() != dst.rows() || src.cols() != dst.cols() || src.tile_size() != dst.tile_size())
    throw std::invalid_argument("copy_tiles: shape mismatch");
  for (std::size_t i = 0; i < src.grid_rows(); ++i)
    for (std::size_t j = 0; j < src.grid_cols(); ++j) {
      std::error_code ec;
      fs::remove(dst.tile_path({i, j}), ec);
      if (src.has_tile({i, j})) {
        fs::copy_file(src.tile_path({i, j}), dst.tile_path({i, j}), ec);
        if (ec) throw IoError("copy of " + src.tile_path({i, j}).string() + " failed: " + ec.message());
      }
    }
}

// ---------------------------------------------------------------------------
// TileCache

struct TileCache::Shared {
  std::atomic<double> read_seconds{0.0};
  std::atomic<double> write_seconds{0.0};
};

std::size_t TileCache::KeyHash::operator()(const Key& k) const noexcept {
  std::size_t h = k.matrix;
  h = h * 1000003u ^ k.id.row_block;
  h = h * 1000003u ^ k.id.col_block;
  return h;
}

TileCache::TileCache(std::size_t capacity_tiles, IoAgent* agent)
    : capacity_(capacity_tiles), agent_(agent), shared_(std::make_shared<Shared>()) {
  if (capacity_ == 0) throw ConfigError("tile cache capacity must be at least one tile");
}

TileCache::~TileCache() {
  try {
    flush();
    drain();
  } catch (const std::exception& e) {
    std::cerr << "oocqr: tile cache flush failed during teardown: " << e.what() << '\n';
  }
}

std::size_t TileCache::capacity_for_budget(std::uint64_t budget_bytes, std::size_t tile_size) {
  const std::uint64_t per_tile = static_cast<std::uint64_t>(tile_size) * tile_size * sizeof(double);
  return static_cast<std::size_t>(std::max<std::uint64_t>(1, budget_bytes / per_tile));
}

std::size_t TileCache::intern(const TiledMatrix& m) {
  std::string name = fs::absolute(m.dir()).lexically_normal().string();
  auto [it, inserted] = matrix_index_.try_emplace(name, matrices_.size());
  if (inserted) matrices_.push_back(m);
  return it->second;
}

TileCache::Key TileCache::key_of(const TiledMatrix& m, TileId id) const {
  std::string name = fs::absolute(m.dir()).lexically_normal().string();
  auto it = matrix_index_.find(name);
  return Key{it == matrix_index_.end() ? static_cast<std::size_t>(-1) : it->second, id};
}

TileCache::Entry* TileCache::find(const Key& key) {
  auto it = resident_.find(key);
  return it == resident_.end() ? nullptr : &it->second;
}

void TileCache::touch(Entry& e) { lru_.splice(lru_.end(), lru_, e.lru); }

void TileCache::record_read(double s) { local_.read_seconds += s; }
void TileCache::record_write(double s) { local_.write_seconds += s; }

void TileCache::write_back(const Key& key, Entry& e) {
  const TiledMatrix& m = matrices_[key.matrix];
  ++local_.writes_to_disk;
  if (agent_) {
    Buffer data = e.data;
    auto shared = shared_;
    TileId id = key.id;
    TiledMatrix target = m;
    auto done = agent_->submit([data, shared, id, target] {
      auto t0 = Clock::now();
      target.store(id, *data);
      shared->write_seconds.fetch_add(seconds_since(t0));
    });
    writing_[key] = Pending{std::move(data), std::move(done)};
  } else {
    auto t0 = Clock::now();
    m.store(key.id, *e.data);
    record_write(seconds_since(t0));
  }
  e.dirty = false;
}

void TileCache::make_room() {
  while (resident_.size() >= capacity_) {
    auto victim = std::find_if(lru_.begin(), lru_.end(),
                               [this](const Key& k) { return resident_.at(k).pins == 0; });
    if (victim == lru_.end())
      throw std::runtime_error("tile cache capacity " + std::to_string(capacity_) +
                               " exhausted by pinned tiles");
    Key key = *victim;
    Entry& e = resident_.at(key);
    if (e.dirty) write_back(key, e);
    lru_.erase(e.lru);
    resident_.erase(key);
  }
}

TileCache::Entry& TileCache::insert(const Key& key, Buffer data, bool dirty) {
  make_room();
  lru_.push_back(key);
  Entry e;
  e.data = std::move(data);
  e.dirty = dirty;
  e.lru = std::prev(lru_.end());
  return resident_.emplace(key, std::move(e)).first->second;
}

void TileCache::wait_pending_write(const Key& key) {
  auto it = writing_.find(key);
  if (it == writing_.end()) return;
  auto t0 = Clock::now();
  it->second.done.get();
  local_.write_stall_seconds += seconds_since(t0);
  writing_.erase(it);
}

TileCache::Buffer TileCache::load_now(const Key& key) {
  const TiledMatrix& m = matrices_[key.matrix];
  auto data = std::make_shared<std::vector<double>>(m.tile_elems());
  ++local_.reads_from_disk;
  if (agent_) {
    auto shared = shared_;
    TileId id = key.id;
    TiledMatrix source = m;
    auto done = agent_->submit([data, shared, id, source] {
      auto t0 = Clock::now();
      source.load(id, *data);
      shared->read_seconds.fetch_add(seconds_since(t0));
    });
    auto t0 = Clock::now();
    done.get();
    local_.read_stall_seconds += seconds_since(t0);
  } else {
    auto t0 = Clock::now();
    m.load(key.id, *data);
    record_read(seconds_since(t0));
  }
  return data;
}

double* TileCache::pin(const TiledMatrix& m, TileId id, Access access) {
  if (!m.contains(id)) throw std::out_of_range("tile " + to_string(id) + " outside grid");
  Key key{intern(m), id};

  if (Entry* e = find(key)) {
    ++local_.hits;
    touch(*e);
    ++e->pins;
    if (access == Access::overwrite) std::fill(e->data->begin(), e->data->end(), 0.0);
    return e->data->data();
  }

  Buffer data;
  if (auto st = staged_.find(key); st != staged_.end()) {
    auto t0 = Clock::now();
    st->second.done.get();
    local_.read_stall_seconds += seconds_since(t0);
    data = std::move(st->second.data);
    staged_.erase(st);
    if (access == Access::overwrite) std::fill(data->begin(), data->end(), 0.0);
  } else if (auto wr = writing_.find(key); wr != writing_.end()) {
    // Evicted but still queued for write-back: reclaim the buffer once the
    // agent is done with it instead of reading the file again.
    data = wr->second.data;
    wait_pending_write(key);
    ++local_.hits;
    if (access == Access::overwrite) std::fill(data->begin(), data->end(), 0.0);
  } else if (access == Access::overwrite) {
    data = std::make_shared<std::vector<double>>(m.tile_elems(), 0.0);
  } else {
    data = load_now(key);
  }

  Entry& e = insert(key, std::move(data), false);
  e.pins = 1;
  return e.data->data();
}

void TileCache::unpin(const TiledMatrix& m, TileId id) {
  Entry* e = find(key_of(m, id));
  if (!e || e->pins == 0) throw std::logic_error("unpin of a tile that is not pinned");
  --e->pins;
}

void TileCache::mark_dirty(const TiledMatrix& m, TileId id) {
  Entry* e = find(key_of(m, id));
  if (!e) throw std::logic_error("mark_dirty on a non-resident tile");
  e->dirty = true;
}

std::vector<double> TileCache::read_tile(const TiledMatrix& m, TileId id) {
  const double* p = pin(m, id, Access::read);
  std::vector<double> out(p, p + m.tile_elems());
  unpin(m, id);
  return out;
}

void TileCache::write_tile(const TiledMatrix& m, TileId id, std::span<const double> tile) {
  if (tile.size() != m.tile_elems()) throw std::invalid_argument("write_tile: buffer is not b*b");
  double* p = pin(m, id, Access::overwrite);
  std::copy(tile.begin(), tile.end(), p);
  mark_dirty(m, id);
  unpin(m, id);
}

void TileCache::flush() {
  for (const Key& key : lru_) {
    Entry& e = resident_.at(key);
    if (e.dirty) write_back(key, e);
  }
  // Resident buffers were handed to the agent by reference; wait so the
  // owner cannot modify them while they are being written.
  for (auto& [key, pending] : writing_) {
    auto t0 = Clock::now();
    pending.done.get();
    local_.write_stall_seconds += seconds_since(t0);
  }
  writing_.clear();
}

void TileCache::prefetch(const TiledMatrix& m, TileId id) {
  if (!agent_) return;
  Key key{intern(m), id};
  if (find(key) || staged_.count(key) || writing_.count(key)) return;
  auto data = std::make_shared<std::vector<double>>(m.tile_elems());
  ++local_.reads_from_disk;
  auto shared = shared_;
  TiledMatrix source = m;
  auto done = agent_->submit([data, shared, id, source] {
    auto t0 = Clock::now();
    source.load(id, *data);
    shared->read_seconds.fetch_add(seconds_since(t0));
  });
  staged_[key] = Pending{std::move(data), std::move(done)};
}

void TileCache::drain() {
  std::exception_ptr first;
  auto settle = [&first](Pending& p) {
    try {
      p.done.get();
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  };
  for (auto& [key, p] : staged_) settle(p);
  staged_.clear();
  for (auto& [key, p] : writing_) settle(p);
  writing_.clear();
  if (first) std::rethrow_exception(first);
}

bool TileCache::is_resident(const TiledMatrix& m, TileId id) const {
  return resident_.count(key_of(m, id)) != 0;
}

bool TileCache::is_dirty(const TiledMatrix& m, TileId id) const {
  auto it = resident_.find(key_of(m, id));
  return it != resident_.end() && it->second.dirty;
}

std::vector<TileCache::Key> TileCache::lru_order() const { return {lru_.begin(), lru_.end()}; }

CacheCounters TileCache::counters() const {
  CacheCounters c = local_;
  c.read_seconds += shared_->read_seconds.load();
  c.write_seconds += shared_->write_seconds.load();
  return c;
}

}  // namespace oocqr
