#include "oocqr/tasks.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

namespace oocqr {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::CompDenseQR: return "CompDenseQR";
    case OpKind::CompTdQR: return "CompTdQR";
    case OpKind::ApplyQtDense: return "ApplyQtDense";
    case OpKind::ApplyQtTD: return "ApplyQtTD";
    case OpKind::TrsmLunn: return "TrsmLunn";
    case OpKind::GemmNnMo: return "GemmNnMo";
  }
  return "?";
}

TileRef tile_a(std::size_t i, std::size_t j) { return {Role::A, {i, j}}; }
TileRef tile_s(std::size_t i, std::size_t j) { return {Role::S, {i, j}}; }
TileRef tile_b(std::size_t i, std::size_t j) { return {Role::B, {i, j}}; }

std::string to_string(const TileRef& t) {
  const char* r = t.role == Role::A ? "A" : t.role == Role::S ? "S" : "B";
  return std::string(r) + std::to_string(t.id.row_block) + "," + std::to_string(t.id.col_block);
}

std::string to_string(const Task& t) {
  std::string s = std::to_string(t.seq) + " " + op_name(t.op) + " out[";
  for (std::size_t i = 0; i < t.out.size(); ++i) s += (i ? " " : "") + to_string(t.out[i]);
  s += "] in[";
  for (std::size_t i = 0; i < t.in.size(); ++i) s += (i ? " " : "") + to_string(t.in[i]);
  return s + "]";
}

namespace {

void push(std::vector<Task>& list, OpKind op, std::vector<TileRef> in, std::vector<TileRef> out) {
  list.push_back(Task{op, std::move(in), std::move(out), list.size()});
}

// Q^T of factor column j applied to the block column held in role `role`,
// column `c`.
void apply_column(std::vector<Task>& list, std::size_t p, std::size_t j, Role role, std::size_t c) {
  TileRef cj{role, {j, c}};
  push(list, OpKind::ApplyQtDense, {tile_a(j, j), tile_s(j, j), cj}, {cj});
  for (std::size_t i = j + 1; i < p; ++i) {
    TileRef ci{role, {i, c}};
    push(list, OpKind::ApplyQtTD, {tile_a(i, j), tile_s(i, j), cj, ci}, {cj, ci});
  }
}

}  // namespace

std::vector<Task> gen_factorization_tasks(std::size_t p, std::size_t q) {
  if (q == 0 || p < q) throw std::invalid_argument("factorization grid needs p >= q >= 1");
  std::vector<Task> list;
  for (std::size_t k = 0; k < q; ++k) {
    for (std::size_t j = 0; j < k; ++j) apply_column(list, p, j, Role::A, k);
    push(list, OpKind::CompDenseQR, {tile_a(k, k)}, {tile_a(k, k), tile_s(k, k)});
    for (std::size_t i = k + 1; i < p; ++i)
      push(list, OpKind::CompTdQR, {tile_a(k, k), tile_a(i, k)},
           {tile_a(k, k), tile_a(i, k), tile_s(i, k)});
  }
  return list;
}

std::vector<Task> gen_solve_tasks(std::size_t p, std::size_t q, std::size_t r) {
  if (q == 0 || p < q) throw std::invalid_argument("solve grid needs p >= q >= 1");
  std::vector<Task> list;
  for (std::size_t c = 0; c < r; ++c) {
    for (std::size_t j = 0; j < q; ++j) apply_column(list, p, j, Role::B, c);
    for (std::size_t k = q; k-- > 0;) {
      for (std::size_t j = k + 1; j < q; ++j)
        push(list, OpKind::GemmNnMo, {tile_b(k, c), tile_a(k, j), tile_b(j, c)}, {tile_b(k, c)});
      push(list, OpKind::TrsmLunn, {tile_a(k, k), tile_b(k, c)}, {tile_b(k, c)});
    }
  }
  return list;
}

std::optional<std::string> check_dataflow(const std::vector<Task>& tasks) {
  static const std::map<OpKind, std::pair<std::size_t, std::size_t>> arity = {
      {OpKind::CompDenseQR, {1, 2}}, {OpKind::CompTdQR, {2, 3}}, {OpKind::ApplyQtDense, {3, 1}},
      {OpKind::ApplyQtTD, {4, 2}},   {OpKind::TrsmLunn, {2, 1}}, {OpKind::GemmNnMo, {3, 1}},
  };
  auto key = [](const TileRef& t) {
    return std::tuple(static_cast<int>(t.role), t.id.row_block, t.id.col_block);
  };
  std::map<decltype(key(TileRef{})), std::size_t> last_write;
  for (const Task& t : tasks)
    for (const TileRef& o : t.out) last_write[key(o)] = t.seq;

  std::set<decltype(key(TileRef{}))> produced;
  for (std::size_t n = 0; n < tasks.size(); ++n) {
    const Task& t = tasks[n];
    if (t.seq != n) return "task at position " + std::to_string(n) + " has seq " + std::to_string(t.seq);
    auto [ni, no] = arity.at(t.op);
    if (t.in.size() != ni || t.out.size() != no) return "wrong operand count: " + to_string(t);
    for (const TileRef& in : t.in) {
      if (in.role == Role::S && !produced.count(key(in)))
        return "S tile read before it is produced: " + to_string(t);
      bool also_out = std::find(t.out.begin(), t.out.end(), in) != t.out.end();
      auto lw = last_write.find(key(in));
      if (!also_out && lw != last_write.end() && lw->second > t.seq)
        return "read-only operand " + to_string(in) + " is written later by task " +
               std::to_string(lw->second) + ": " + to_string(t);
    }
    for (const TileRef& o : t.out) produced.insert(key(o));
  }
  return std::nullopt;
}

}  // namespace oocqr
