#pragma once

#include <coroutine>
#include <cstdint>
#include <deque>
#include <exception>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "streamfort/pipeline.hpp"
#include "streamfort/value.hpp"

namespace sf {

/// Bounded FIFO of raw words. Blocking is expressed through Scheduler
/// awaitables; the methods here never block.
class Channel {
 public:
  Channel(std::string name, std::int64_t capacity);

  const std::string& name() const { return name_; }
  std::int64_t capacity() const { return capacity_; }
  std::size_t size() const { return queue_.size(); }
  bool full() const { return static_cast<std::int64_t>(queue_.size()) >= capacity_; }
  bool empty() const { return queue_.empty(); }
  bool closed() const { return closed_; }
  std::int64_t pushes() const { return pushes_; }
  std::int64_t pops() const { return pops_; }

  /// Throws WriteAfterClose once closed; precondition: !full().
  void push(Word w);
  /// Precondition: !empty().
  Word pop();
  void close() { closed_ = true; }

 private:
  std::string name_;
  std::int64_t capacity_;
  std::deque<Word> queue_;
  bool closed_ = false;
  std::int64_t pushes_ = 0;
  std::int64_t pops_ = 0;
};

struct ProcessCounters {
  std::int64_t globalReads = 0;
  std::int64_t globalWrites = 0;
  std::int64_t channelPushes = 0;
  std::int64_t channelPops = 0;
  /// Suspensions on a full or empty channel or an unmet watermark. Depends
  /// on the schedule.
  std::int64_t stallCycles = 0;

  ProcessCounters& operator+=(const ProcessCounters& o);
  std::int64_t global_accesses() const { return globalReads + globalWrites; }
};

/// Coroutine body of one process.
class Task {
 public:
  struct promise_type {
    std::exception_ptr error;
    Task get_return_object() { return Task(std::coroutine_handle<promise_type>::from_promise(*this)); }
    std::suspend_always initial_suspend() noexcept { return {}; }
    std::suspend_always final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() { error = std::current_exception(); }
  };

  Task() = default;
  explicit Task(std::coroutine_handle<promise_type> h) : h_(h) {}
  Task(Task&& o) noexcept : h_(std::exchange(o.h_, {})) {}
  Task& operator=(Task&& o) noexcept;
  Task(const Task&) = delete;
  Task& operator=(const Task&) = delete;
  ~Task();

  std::coroutine_handle<promise_type> handle() const { return h_; }

 private:
  std::coroutine_handle<promise_type> h_;
};

enum class SchedMode { RoundRobin, Random };

struct SchedConfig {
  SchedMode mode = SchedMode::RoundRobin;
  std::uint64_t seed = 0;
  /// Process resumptions before NonTermination is raised.
  std::int64_t maxSteps = 4'000'000'000LL;
};

/// Parses "rr" or "random:<seed>".
std::optional<SchedConfig> parse_sched(const std::string& text);

/// Cooperative scheduler for processes that talk through blocking
/// channels. Any fair order gives the same results (Kahn semantics);
/// the random mode exists to check exactly that.
class Scheduler {
 public:
  explicit Scheduler(SchedConfig cfg = {});

  void spawn(std::string name, Task task);
  /// Runs until every process finished. Throws DeadlockDetected when all
  /// live processes are blocked, NonTermination past the step budget, or
  /// whatever a process threw.
  void run();

  ProcessCounters& counters() { return procs_[current_].counters; }
  const std::vector<std::string>& names() const { return names_; }
  const ProcessCounters& counters_of(std::size_t i) const { return procs_[i].counters; }
  std::int64_t steps() const { return steps_; }

  struct Wait {
    enum class Kind { None, Write, Read, Mark } kind = Kind::None;
    Channel* ch = nullptr;
    const std::int64_t* mark = nullptr;
    std::int64_t need = 0;
    bool ready() const;
  };

  struct WriteAwait {
    Scheduler* s;
    Channel* ch;
    Word w;
    bool await_ready();
    void await_suspend(std::coroutine_handle<>) {}
    void await_resume();
  };
  struct ReadAwait {
    Scheduler* s;
    Channel* ch;
    bool await_ready();
    void await_suspend(std::coroutine_handle<>) {}
    std::optional<Word> await_resume();
  };
  struct MarkAwait {
    Scheduler* s;
    const std::int64_t* mark;
    std::int64_t need;
    bool await_ready();
    void await_suspend(std::coroutine_handle<>) {}
    void await_resume() {}
  };

  WriteAwait write(Channel& ch, Word w) { return {this, &ch, w}; }
  /// nullopt once the channel is empty and closed.
  ReadAwait read(Channel& ch) { return {this, &ch}; }
  /// Wait until `*mark >= need`.
  MarkAwait until(const std::int64_t& mark, std::int64_t need) { return {this, &mark, need}; }

 private:
  struct Proc {
    Task task;
    Wait wait;
    bool done = false;
    ProcessCounters counters;
  };
  bool block(Wait w);
  void resume(std::size_t i);

  SchedConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<Proc> procs_;
  std::vector<std::string> names_;
  std::size_t current_ = 0;
  std::int64_t steps_ = 0;
  /// Operations that did not block since the last resumption; a process
  /// yields after kSlice of them so the step budget covers busy loops.
  static constexpr std::int64_t kSlice = 4096;
  std::int64_t sliceOps_ = 0;
};

/// Stream `input` (Size elements) into one channel per offset: tuple p
/// carries x[p+d] for every offset d, with out-of-range positions
/// resolved by the spec's boundary policy.
Task smart_cache_run(Scheduler& s, const SmartCacheSpec& spec, Channel& input, std::vector<Channel*> outputs);

struct ChannelStats {
  std::int64_t pushes = 0;
  std::int64_t pops = 0;
  std::int64_t residual = 0;
};

struct SimReport {
  std::map<std::string, ProcessCounters> perKernel;
  ProcessCounters totals;
  std::map<std::string, ChannelStats> channels;
  std::int64_t bytesToDevice = 0;
  std::int64_t bytesToHost = 0;
  std::optional<std::vector<std::string>> deadlock;

  std::string to_json() const;
};

struct SimResult {
  HostState host;
  /// Global memory at the end of the run.
  HostState device;
  SimReport report;
};

struct SimOptions {
  SchedConfig sched;
  /// Replaces the graph's host plan when set.
  const std::vector<HostOp>* plan = nullptr;
};

/// Execute the graph's host plan. `nt` replaces the time-loop trip count.
SimResult run_pipeline(const PipelineGraph& g, const HostState& initial, std::int64_t nt, const SimOptions& opts = {});

/// Closed-form counters for `nt` steps, per process and in total.
SimReport count_accesses(const PipelineGraph& g, std::int64_t nt);

}  // namespace sf
