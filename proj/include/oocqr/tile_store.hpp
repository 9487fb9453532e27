#pragma once

// Disk-backed tiled matrices and the bounded write-back LRU cache that
// stages their tiles in memory.
//
// On-disk layout of a matrix directory:
//   manifest.txt      key=value lines: format_version, element_type, layout,
//                     rows, cols, tile_size, grid_rows, grid_cols
//   t_<r>_<c>.blk     one tile, tile_size*tile_size little-endian float64,
//                     column-major; absent file == all-zero tile
// Edge tiles are always stored at full size with zero padding.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace oocqr {

class IoAgent;

struct TileId {
  std::size_t row_block = 0;
  std::size_t col_block = 0;

  friend auto operator<=>(const TileId&, const TileId&) = default;
};

std::string to_string(const TileId& id);

inline constexpr int kTileFormatVersion = 1;

class TiledMatrix {
 public:
  TiledMatrix() = default;

  /// Writes a manifest into `dir` (created if needed). An existing manifest
  /// with identical dimensions is reopened as-is; a different one is an error.
  static TiledMatrix create(std::size_t rows, std::size_t cols, std::size_t tile_size,
                            const std::filesystem::path& dir);
  static TiledMatrix open(const std::filesystem::path& dir);
  static bool exists(const std::filesystem::path& dir);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t tile_size() const noexcept { return tile_size_; }
  std::size_t grid_rows() const noexcept { return grid_rows_; }
  std::size_t grid_cols() const noexcept { return grid_cols_; }
  std::size_t tile_elems() const noexcept { return tile_size_ * tile_size_; }
  std::size_t tile_count() const noexcept { return grid_rows_ * grid_cols_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

  /// Number of logical (non-padding) rows/columns inside a tile.
  std::size_t rows_in(std::size_t row_block) const;
  std::size_t cols_in(std::size_t col_block) const;

  bool contains(TileId id) const noexcept {
    return id.row_block < grid_rows_ && id.col_block < grid_cols_;
  }
  std::filesystem::path tile_path(TileId id) const;
  bool has_tile(TileId id) const;

  /// Reads a tile straight from disk (no cache). Absent tiles read as zeros.
  void load(TileId id, std::span<double> out) const;
  /// Writes a tile straight to disk (no cache).
  void store(TileId id, std::span<const double> tile) const;
  /// Removes every tile file, leaving the manifest.
  void clear_tiles() const;

 private:
  void check(TileId id) const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t tile_size_ = 0;
  std::size_t grid_rows_ = 0;
  std::size_t grid_cols_ = 0;
  std::filesystem::path dir_;
};

/// Scatters a dense column-major rows x cols matrix into tiles on disk.
/// All-zero tiles are not written.
void scatter(const TiledMatrix& m, std::span<const double> dense);
/// Gathers the logical rows x cols of a tiled matrix into a column-major array.
std::vector<double> gather(const TiledMatrix& m);
/// Copies every present tile file of `src` into `dst` (same shape required).
void copy_tiles(const TiledMatrix& src, const TiledMatrix& dst);

struct CacheCounters {
  std::uint64_t reads_from_disk = 0;
  std::uint64_t writes_to_disk = 0;
  std::uint64_t hits = 0;
  /// Seconds spent inside disk reads / writes (on whichever thread did them).
  double read_seconds = 0.0;
  double write_seconds = 0.0;
  /// Seconds the owning thread spent blocked on the I/O agent.
  double read_stall_seconds = 0.0;
  double write_stall_seconds = 0.0;
};

enum class Access {
  read,       ///< contents needed: served from memory or disk
  overwrite,  ///< caller replaces every element: zero-filled, never read
};

/// Bounded set of resident tiles with LRU eviction and dirty write-back.
///
/// Several matrices may share one cache (one memory budget). Tiles are keyed
/// by the matrix directory, so two TiledMatrix handles for the same directory
/// address the same cached tiles. Bookkeeping is single-owner: one thread
/// calls into the cache at a time. When an IoAgent is attached, dirty
/// evictions and prefetches run on the agent thread.
class TileCache {
 public:
  struct Key {
    std::size_t matrix = 0;
    TileId id;
    friend bool operator==(const Key&, const Key&) = default;
  };

  explicit TileCache(std::size_t capacity_tiles, IoAgent* agent = nullptr);
  TileCache(const TileCache&) = delete;
  TileCache& operator=(const TileCache&) = delete;
  /// Flushes remaining dirty tiles; errors at this point are reported on stderr.
  ~TileCache();

  /// Capacity in tiles for a byte budget (at least 1).
  static std::size_t capacity_for_budget(std::uint64_t budget_bytes, std::size_t tile_size);

  std::vector<double> read_tile(const TiledMatrix& m, TileId id);
  void write_tile(const TiledMatrix& m, TileId id, std::span<const double> tile);
  void flush();

  /// Makes a tile resident and pins it against eviction until unpin().
  /// Pins nest. The pointer stays valid while the tile is pinned.
  double* pin(const TiledMatrix& m, TileId id, Access access = Access::read);
  void unpin(const TiledMatrix& m, TileId id);
  void mark_dirty(const TiledMatrix& m, TileId id);

  /// Starts an asynchronous read of a non-resident tile into the staging
  /// area (outside the capacity bound). No-op without an agent, or when the
  /// tile is already resident or staged.
  void prefetch(const TiledMatrix& m, TileId id);
  /// Waits for outstanding agent work and drops unused staged tiles.
  void drain();

  bool is_resident(const TiledMatrix& m, TileId id) const;
  bool is_dirty(const TiledMatrix& m, TileId id) const;
  /// Resident tiles, least recently used first.
  std::vector<Key> lru_order() const;
  Key key_of(const TiledMatrix& m, TileId id) const;

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t resident_count() const noexcept { return resident_.size(); }
  std::size_t staged_count() const noexcept { return staged_.size(); }
  CacheCounters counters() const;

 private:
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  using Buffer = std::shared_ptr<std::vector<double>>;
  struct Entry {
    Buffer data;
    bool dirty = false;
    int pins = 0;
    std::list<Key>::iterator lru;
  };
  struct Pending {
    Buffer data;
    std::shared_future<void> done;
  };

  std::size_t intern(const TiledMatrix& m);
  Entry& insert(const Key& key, Buffer data, bool dirty);
  Entry* find(const Key& key);
  void touch(Entry& e);
  void make_room();
  void write_back(const Key& key, Entry& e);
  Buffer load_now(const Key& key);
  void wait_pending_write(const Key& key);
  void record_read(double seconds);
  void record_write(double seconds);

  std::size_t capacity_;
  IoAgent* agent_;
  std::vector<TiledMatrix> matrices_;
  std::unordered_map<std::string, std::size_t> matrix_index_;
  std::unordered_map<Key, Entry, KeyHash> resident_;
  std::list<Key> lru_;  // front = least recently used
  std::unordered_map<Key, Pending, KeyHash> staged_;
  std::unordered_map<Key, Pending, KeyHash> writing_;

  struct Shared;  // counters touched by the agent thread
  std::shared_ptr<Shared> shared_;
  CacheCounters local_;
};

}  // namespace oocqr
