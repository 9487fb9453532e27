#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <set>
#include <sstream>

#include "oocqr/engine.hpp"
#include "oocqr/errors.hpp"
#include "support/engine_fixture.hpp"

using namespace oocqr;
using namespace testing;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Distinct tiles that some task reads before any task produces them.
std::size_t distinct_initial_inputs(const std::vector<Task>& tasks) {
  std::set<std::pair<int, TileId>> produced, initial;
  for (const auto& t : tasks) {
    std::set<std::pair<int, TileId>> outs;
    for (const auto& o : t.out) outs.insert({static_cast<int>(o.role), o.id});
    for (const auto& i : t.in) {
      std::pair<int, TileId> k{static_cast<int>(i.role), i.id};
      if (!produced.count(k)) initial.insert(k);
    }
    produced.insert(outs.begin(), outs.end());
  }
  return initial.size();
}

}  // namespace

TEST_CASE("engine configuration validation") {
  EngineConfig c = small_engine(8, 4, 16);
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.compute_workers = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.mode = Mode::overlapped;
  bad.io_agents = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.inner_block = 9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = small_engine(8, 4, 3);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_mode("overlapped") == Mode::overlapped);
  CHECK_THROWS_AS(parse_mode("parallel"), ConfigError);
}

TEST_CASE("empty task list gives a zero report") {
  TempDir d;
  auto a = TiledMatrix::create(8, 8, 8, d / "A");
  auto s = TiledMatrix::create(8, 8, 8, d / "S");
  auto r = execute({}, MatrixSet{&a, &s, nullptr}, small_engine(8, 4, 8));
  CHECK(r.tasks == 0);
  CHECK(r.tiles_read == 0);
  CHECK(r.tiles_written == 0);
  CHECK(r.cache_hits == 0);
  CHECK(r.trace.empty());
}

TEST_CASE("identity matrix factorizes to R = I with zero reflectors") {
  TempDir d;
  const std::size_t n = 20, b = 8;
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eye[i + i * n] = 1.0;
  auto a = TiledMatrix::create(n, n, b, d / "A");
  scatter(a, eye);
  auto f = factorize(a, d / "F", small_engine(b, 4, 8));
  CHECK(gather(f.qr) == eye);
  auto s = gather(f.s);
  CHECK(std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; }));
  CHECK(factors_exist(d / "F"));
}

TEST_CASE("3x3 grid: R magnitudes match the dense oracle") {
  TempDir d;
  std::mt19937_64 rng(31);
  const std::size_t b = 8, n = 24;
  auto a0 = random_matrix(n, n, rng);
  auto a = TiledMatrix::create(n, n, b, d / "A");
  scatter(a, a0);
  auto f = factorize(a, d / "F", small_engine(b, 4, 6));
  auto qr = gather(f.qr);
  DenseQr oracle(a0, n, n);
  auto rref = oracle.r_factor();
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0, diff = 0.0;
    for (std::size_t i = 0; i <= j; ++i) {
      norm += rref[i + j * n] * rref[i + j * n];
      const double e = std::abs(qr[i + j * n]) - std::abs(rref[i + j * n]);
      diff += e * e;
    }
    CHECK(std::sqrt(diff / norm) <= 1e-10);
  }
}

TEST_CASE("full-size grid arithmetic") {
  TempDir d;
  auto a = TiledMatrix::create(266500, 262144, 10240, d / "A");
  CHECK(a.grid_rows() == 27);
  CHECK(a.grid_cols() == 26);
  CHECK(gen_factorization_tasks(a.grid_rows(), a.grid_cols()).size() > 0);
}

TEST_CASE("out-of-core solve matches the in-core oracle") {
  std::mt19937_64 rng(32);
  struct Case {
    std::size_t m, n, b, w, nrhs, cache;
  };
  for (const Case c : {Case{8, 8, 8, 4, 3, 4}, Case{24, 24, 8, 4, 5, 4}, Case{30, 27, 8, 3, 9, 5},
                       Case{32, 20, 8, 8, 8, 6}, Case{50, 41, 13, 5, 2, 100}, Case{64, 64, 16, 4, 16, 7}}) {
    CAPTURE(c.m);
    CAPTURE(c.n);
    CAPTURE(c.b);
    TempDir d;
    auto a = random_system(c.m, c.n, rng);
    auto rhs = random_matrix(c.m, c.nrhs, rng);
    auto run = ooc_solve(a, c.m, c.n, rhs, c.nrhs, small_engine(c.b, c.w, c.cache), d.path());
    DenseQr oracle(a, c.m, c.n);
    CHECK(relative_error(run.x, oracle.solve(rhs, c.nrhs)) <= 1e-10);
  }
}

TEST_CASE("B = A X0 recovers X0") {
  std::mt19937_64 rng(33);
  TempDir d;
  const std::size_t n = 40, b = 16, r = 5;
  auto a = random_system(n, n, rng);
  auto x0 = random_matrix(n, r, rng);
  auto rhs = matmul(a, x0, n, n, r);
  auto run = ooc_solve(a, n, n, rhs, r, small_engine(b, 8, 5), d.path());
  CHECK(relative_error(run.x, x0) <= 1e-10);
}

TEST_CASE("B = 0 gives X = 0") {
  std::mt19937_64 rng(34);
  TempDir d;
  const std::size_t n = 20, b = 8;
  auto a = random_system(n, n, rng);
  std::vector<double> zero(n * 4, 0.0);
  auto run = ooc_solve(a, n, n, zero, 4, small_engine(b, 4, 6), d.path());
  CHECK(std::all_of(run.x.begin(), run.x.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("sequential and overlapped runs persist bitwise-identical X tiles") {
  std::mt19937_64 rng(35);
  for (std::size_t cache : {4u, 6u, 64u}) {
    CAPTURE(cache);
    TempDir d1, d2;
    const std::size_t n = 24, b = 8, r = 10;
    auto a = random_system(n, n, rng);
    auto rhs = random_matrix(n, r, rng);
    auto s = small_engine(b, 4, cache, Mode::sequential);
    auto o = small_engine(b, 4, cache, Mode::overlapped);
    o.compute_workers = 2;
    ooc_solve(a, n, n, rhs, r, s, d1.path());
    ooc_solve(a, n, n, rhs, r, o, d2.path());
    auto x1 = TiledMatrix::open(d1 / "X");
    for (std::size_t i = 0; i < x1.grid_rows(); ++i)
      for (std::size_t j = 0; j < x1.grid_cols(); ++j) {
        auto rel = std::filesystem::relative(x1.tile_path({i, j}), d1.path());
        CHECK(slurp(d1.path() / rel) == slurp(d2.path() / rel));
      }
    for (const char* sub : {"factors/QR", "factors/S"}) {
      auto m = TiledMatrix::open(d1 / sub);
      for (std::size_t i = 0; i < m.grid_rows(); ++i)
        for (std::size_t j = 0; j < m.grid_cols(); ++j) {
          auto rel = std::filesystem::relative(m.tile_path({i, j}), d1.path());
          CHECK(slurp(d1.path() / rel) == slurp(d2.path() / rel));
        }
    }
  }
}

TEST_CASE("with a cache holding everything each input tile is read once") {
  std::mt19937_64 rng(36);
  TempDir d;
  const std::size_t n = 24, b = 8;
  auto a = TiledMatrix::create(n, n, b, d / "A");
  scatter(a, random_matrix(n, n, rng));
  auto tasks = gen_factorization_tasks(3, 3);
  for (Mode mode : {Mode::sequential, Mode::overlapped}) {
    auto work = TiledMatrix::create(n, n, b, d / (std::string("W") + mode_name(mode)));
    copy_tiles(a, work);
    auto s = TiledMatrix::create(n, n, b, d / (std::string("S") + mode_name(mode)));
    auto rep = execute(tasks, MatrixSet{&work, &s, nullptr}, small_engine(b, 4, 64, mode));
    CHECK(rep.tiles_read == distinct_initial_inputs(tasks));
    CHECK(rep.tiles_read == 9);
    CHECK(rep.tiles_written == 9 + 6);
    CHECK(rep.tasks == 14);
    CHECK(rep.trace.size() == 14);
  }
}

TEST_CASE("left-looking write bound holds for small caches") {
  std::mt19937_64 rng(37);
  for (std::size_t g : {2u, 3u, 4u, 5u})
    for (std::size_t extra : {0u, 2u})
      for (std::size_t cache : {4u, 5u, 8u}) {
        CAPTURE(g);
        CAPTURE(extra);
        CAPTURE(cache);
        TempDir d;
        const std::size_t b = 4, n = g * b, m = (g + extra) * b;
        auto a = TiledMatrix::create(m, n, b, d / "A");
        scatter(a, random_system(m, n, rng));
        RunReport rep;
        auto f = factorize(a, d / "F", small_engine(b, 2, cache), &rep);
        const std::size_t tiles = f.qr.tile_count() + f.s.tile_count();
        CHECK(rep.tiles_written <= 3 * tiles);
      }
}

TEST_CASE("tiles read per slice falls as the slice count grows") {
  std::mt19937_64 rng(38);
  TempDir d;
  const std::size_t n = 32, b = 8;
  auto a = TiledMatrix::create(n, n, b, d / "A");
  scatter(a, random_system(n, n, rng));
  auto cfg = small_engine(b, 4, 64);
  auto f = factorize(a, d / "F", cfg);
  double prev = 1e300;
  for (std::size_t r : {1u, 2u, 4u, 8u}) {
    auto bm = TiledMatrix::create(n, r * b, b, d / ("B" + std::to_string(r)));
    scatter(bm, random_matrix(n, r * b, rng));
    RunReport rep;
    solve(f, bm, d / ("X" + std::to_string(r)), cfg, &rep);
    const double per_slice = static_cast<double>(rep.tiles_read) / static_cast<double>(r * b);
    CAPTURE(r);
    CHECK(per_slice < prev);
    prev = per_slice;
  }
}

TEST_CASE("sequential report decomposes total time") {
  std::mt19937_64 rng(39);
  TempDir d;
  const std::size_t n = 640, b = 128;
  auto a = TiledMatrix::create(n, n, b, d / "A");
  scatter(a, random_system(n, n, rng));
  RunReport rep;
  factorize(a, d / "F", small_engine(b, 32, 4), &rep);
  const double parts = rep.compute_seconds + rep.io_read_seconds + rep.io_write_seconds;
  CHECK(rep.total_seconds > 0.0);
  CHECK(std::abs(rep.total_seconds - parts) <= 0.05 * rep.total_seconds);
  double trace_ms = 0.0;
  for (const auto& t : rep.trace) trace_ms += t.ms_compute;
  CHECK(std::abs(trace_ms / 1e3 - rep.compute_seconds) <= 1e-6 + 1e-6 * rep.compute_seconds);
}

TEST_CASE("report serialization") {
  RunReport r;
  r.tasks = 2;
  r.tiles_read = 5;
  r.trace.push_back({0, OpKind::CompDenseQR, 1.5, 0.25, 0.0});
  r.trace.push_back({1, OpKind::TrsmLunn, 2.0, 0.0, 0.5});
  std::ostringstream kv, csv;
  r.write_key_value(kv);
  r.write_trace_csv(csv);
  CHECK(kv.str().find("tiles_read=5") != std::string::npos);
  CHECK(kv.str().find("mode=sequential") != std::string::npos);
  std::istringstream lines(csv.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(header == "seq,op,ms_compute,ms_read,ms_write");
  CHECK(first.rfind("0,CompDenseQR,", 0) == 0);
  RunReport sum = r;
  sum += r;
  CHECK(sum.tiles_read == 10);
  CHECK(sum.tasks == 4);
}

TEST_CASE("singular systems report the global column") {
  TempDir d;
  const std::size_t n = 24, b = 8;
  std::mt19937_64 rng(40);
  auto a0 = random_system(n, n, rng);
  for (std::size_t i = 0; i < n; ++i) a0[i + 19 * n] = 0.0;  // zero column 19
  auto a = TiledMatrix::create(n, n, b, d / "A");
  scatter(a, a0);
  auto f = factorize(a, d / "F", small_engine(b, 4, 8));
  auto bm = TiledMatrix::create(n, 1, b, d / "B");
  scatter(bm, random_matrix(n, 1, rng));
  try {
    solve(f, bm, d / "X", small_engine(b, 4, 8));
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(e.column() == 19);
  }
}

TEST_CASE("I/O failures name the failing task") {
  TempDir d;
  const std::size_t n = 16, b = 8;
  std::mt19937_64 rng(41);
  auto a = TiledMatrix::create(n, n, b, d / "A");
  scatter(a, random_system(n, n, rng));
  std::ofstream(a.tile_path({1, 1}), std::ios::binary | std::ios::trunc) << "garbage";
  auto s = TiledMatrix::create(n, n, b, d / "S");
  for (Mode mode : {Mode::sequential, Mode::overlapped}) {
    try {
      execute(gen_factorization_tasks(2, 2), MatrixSet{&a, &s, nullptr}, small_engine(b, 4, 8, mode));
      FAIL("expected TaskIoError");
    } catch (const TaskIoError& e) {
      CHECK(e.seq() == 3);
    }
  }
}
