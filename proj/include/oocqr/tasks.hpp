#pragma once

// Task lists of the left-looking algorithm-by-blocks: QR factorization of a
// p x q tile grid and the solve with r right-hand-side block columns.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "oocqr/tile_store.hpp"

namespace oocqr {

enum class OpKind { CompDenseQR, CompTdQR, ApplyQtDense, ApplyQtTD, TrsmLunn, GemmNnMo };

const char* op_name(OpKind op);

/// Matrix a tile belongs to: the factored matrix, its S-factor grid, or the
/// right-hand side being transformed into the solution.
enum class Role { A, S, B };

struct TileRef {
  Role role = Role::A;
  TileId id;

  friend bool operator==(const TileRef&, const TileRef&) = default;
};

TileRef tile_a(std::size_t i, std::size_t j);
TileRef tile_s(std::size_t i, std::size_t j);
TileRef tile_b(std::size_t i, std::size_t j);

std::string to_string(const TileRef& t);

struct Task {
  OpKind op = OpKind::CompDenseQR;
  /// Operand order follows the kernel signatures:
  ///   CompDenseQR  in [A_kk]               out [A_kk, S_kk]
  ///   CompTdQR     in [A_kk, A_ik]         out [A_kk, A_ik, S_ik]
  ///   ApplyQtDense in [Y, S, C]            out [C]
  ///   ApplyQtTD    in [D, S, F, G]         out [F, G]
  ///   TrsmLunn     in [A_kk, B_kc]         out [B_kc]
  ///   GemmNnMo     in [B_kc, A_kj, B_jc]   out [B_kc]
  std::vector<TileRef> in;
  std::vector<TileRef> out;
  std::size_t seq = 0;

  friend bool operator==(const Task&, const Task&) = default;
};

std::string to_string(const Task& t);

/// Left-looking factorization of a p x q grid (p >= q >= 1).
std::vector<Task> gen_factorization_tasks(std::size_t p, std::size_t q);

/// Solve using factors of a p x q grid for r right-hand-side block columns:
/// per block column, Q^T over all p block rows in factorization order, then
/// block-row back substitution on the first q block rows.
std::vector<Task> gen_solve_tasks(std::size_t p, std::size_t q, std::size_t r);

/// Checks operand arity per op kind, that every S tile read was produced by
/// an earlier task, and that no read-only operand of a task is written by a
/// later task. Returns a description of the first violation.
std::optional<std::string> check_dataflow(const std::vector<Task>& tasks);

}  // namespace oocqr
