#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

namespace bvecchia {

// Thread budget for batched execution. threads == 0 means one worker per
// hardware thread.
struct Parallelism {
  std::size_t threads = 0;

  std::size_t resolved() const noexcept {
    if (threads != 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
  }
};

struct TaskFailure {
  std::size_t index;
  std::string message;
  std::exception_ptr error;
};

template <class R>
struct BatchOutcome {
  std::vector<std::optional<R>> results;
  std::vector<TaskFailure> failures;  // ascending task index

  bool ok() const noexcept { return failures.empty(); }

  // Unwraps the results, rethrowing the failure with the lowest task index.
  std::vector<R> value_or_throw() && {
    if (!failures.empty()) std::rethrow_exception(failures.front().error);
    std::vector<R> out;
    out.reserve(results.size());
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
  }
};

// Runs task(0) ... task(count - 1) as one batch. Tasks must be independent and
// must not share mutable state. Each result lands in the slot of its task
// index, so the output is identical to a sequential loop no matter how the
// workers interleave. A throwing task is recorded and the rest still run.
template <class F>
auto batched_apply(std::size_t count, F&& task, Parallelism parallelism = {})
    -> BatchOutcome<std::invoke_result_t<F&, std::size_t>> {
  using R = std::invoke_result_t<F&, std::size_t>;
  BatchOutcome<R> outcome;
  outcome.results.resize(count);
  std::vector<std::optional<TaskFailure>> failed(count);

  auto run_one = [&](std::size_t i) {
    try {
      outcome.results[i].emplace(task(i));
    } catch (const std::exception& e) {
      failed[i].emplace(TaskFailure{i, e.what(), std::current_exception()});
    } catch (...) {
      failed[i].emplace(TaskFailure{i, "unknown error", std::current_exception()});
    }
  };

  const std::size_t workers = std::min(parallelism.resolved(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto drain = [&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) run_one(i);
    };
    {
      std::vector<std::jthread> pool;
      pool.reserve(workers - 1);
      for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(drain);
      drain();
    }
  }

  for (auto& f : failed) {
    if (f) outcome.failures.push_back(std::move(*f));
  }
  return outcome;
}

}  // namespace bvecchia
