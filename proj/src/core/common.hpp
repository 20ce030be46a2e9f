#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sbr {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
// Column-major: a source block is n x p_k with p_k >> n, so column blocks are
// contiguous.
using Matrix = Eigen::MatrixXd;

enum class ErrorKind { Usage, Data, Numerical, Domain, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

/// Splits [0, tasks) into at most `workers` contiguous ranges and runs
/// fn(worker, begin, end) on each. Range boundaries depend only on
/// (tasks, workers), so per-range results can be reduced in index order.
template <class Fn>
void parallel_ranges(std::size_t tasks, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, tasks));
  if (workers <= 1) {
    if (tasks > 0) fn(std::size_t{0}, std::size_t{0}, tasks);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = tasks * w / workers;
    const std::size_t end = tasks * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::size_t default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

}  // namespace sbr
