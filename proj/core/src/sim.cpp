#include "streamfort/sim.hpp"

#include <algorithm>
#include <charconv>

#include <json.hpp>

#include "streamfort/errors.hpp"
#include "streamfort/interp.hpp"

namespace sf {

Channel::Channel(std::string name, std::int64_t capacity) : name_(std::move(name)), capacity_(capacity) {
  if (capacity_ < 1) throw Error("channel '" + name_ + "' needs a positive capacity");
}

void Channel::push(Word w) {
  if (closed_) throw WriteAfterClose(name_);
  queue_.push_back(w);
  ++pushes_;
}

Word Channel::pop() {
  Word w = queue_.front();
  queue_.pop_front();
  ++pops_;
  return w;
}

ProcessCounters& ProcessCounters::operator+=(const ProcessCounters& o) {
  globalReads += o.globalReads;
  globalWrites += o.globalWrites;
  channelPushes += o.channelPushes;
  channelPops += o.channelPops;
  stallCycles += o.stallCycles;
  return *this;
}

Task& Task::operator=(Task&& o) noexcept {
  if (this != &o) {
    if (h_) h_.destroy();
    h_ = std::exchange(o.h_, {});
  }
  return *this;
}

Task::~Task() {
  if (h_) h_.destroy();
}

std::optional<SchedConfig> parse_sched(const std::string& text) {
  SchedConfig c;
  if (text == "rr") return c;
  const std::string prefix = "random:";
  if (text.rfind(prefix, 0) != 0) return std::nullopt;
  const char* b = text.data() + prefix.size();
  const char* e = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(b, e, c.seed);
  if (ec != std::errc() || ptr != e || b == e) return std::nullopt;
  c.mode = SchedMode::Random;
  return c;
}

bool Scheduler::Wait::ready() const {
  switch (kind) {
    case Kind::None: return true;
    case Kind::Write: return !ch->full() || ch->closed();
    case Kind::Read: return !ch->empty() || ch->closed();
    case Kind::Mark: return *mark >= need;
  }
  return true;
}

Scheduler::Scheduler(SchedConfig cfg) : cfg_(cfg), rng_(cfg.seed) {}

void Scheduler::spawn(std::string name, Task task) {
  names_.push_back(name);
  procs_.push_back(Proc{std::move(task), {}, false, {}});
}

bool Scheduler::block(Wait w) {
  if (w.ready()) {
    // Random mode also gives way at ready points, to vary interleavings.
    if (++sliceOps_ >= kSlice || (cfg_.mode == SchedMode::Random && (rng_() & 3U) == 0)) {
      procs_[current_].wait = Wait{};
      return false;
    }
    return true;
  }
  procs_[current_].wait = w;
  ++procs_[current_].counters.stallCycles;
  return false;
}

bool Scheduler::WriteAwait::await_ready() { return s->block(Wait{Wait::Kind::Write, ch, nullptr, 0}); }

void Scheduler::WriteAwait::await_resume() {
  ch->push(w);
  ++s->counters().channelPushes;
}

bool Scheduler::ReadAwait::await_ready() { return s->block(Wait{Wait::Kind::Read, ch, nullptr, 0}); }

std::optional<Word> Scheduler::ReadAwait::await_resume() {
  if (ch->empty()) return std::nullopt;
  ++s->counters().channelPops;
  return ch->pop();
}

bool Scheduler::MarkAwait::await_ready() { return s->block(Wait{Wait::Kind::Mark, nullptr, mark, need}); }

void Scheduler::resume(std::size_t i) {
  if (++steps_ > cfg_.maxSteps) throw NonTermination(cfg_.maxSteps);
  current_ = i;
  sliceOps_ = 0;
  Proc& p = procs_[i];
  p.wait = Wait{};
  p.task.handle().resume();
  if (p.task.handle().promise().error) std::rethrow_exception(p.task.handle().promise().error);
  if (p.task.handle().done()) p.done = true;
}

void Scheduler::run() {
  std::vector<std::size_t> ready;
  for (;;) {
    ready.clear();
    bool live = false;
    for (std::size_t i = 0; i < procs_.size(); ++i) {
      if (procs_[i].done) continue;
      live = true;
      if (procs_[i].wait.ready()) ready.push_back(i);
    }
    if (!live) return;
    if (ready.empty()) {
      std::vector<std::string> blocked;
      for (std::size_t i = 0; i < procs_.size(); ++i) {
        if (!procs_[i].done) blocked.push_back(names_[i]);
      }
      throw DeadlockDetected(blocked);
    }
    if (cfg_.mode == SchedMode::Random) {
      resume(ready[rng_() % ready.size()]);
    } else {
      for (std::size_t i : ready) {
        if (procs_[i].wait.ready()) resume(i);
      }
    }
  }
}

Task smart_cache_run(Scheduler& s, const SmartCacheSpec& spec, Channel& input, std::vector<Channel*> outputs) {
  const std::int64_t size = spec.size;
  const std::int64_t lead = spec.mpOff + spec.alignDelay;
  const auto cap = static_cast<std::size_t>(spec.bufferLen + spec.alignDelay);
  std::vector<Word> ring(cap);
  std::int64_t consumed = 0;
  for (std::int64_t p = 0; p < size; ++p) {
    const std::int64_t target = std::min(p + lead, size - 1);
    while (consumed <= target) {
      auto w = co_await s.read(input);
      if (!w) throw Error("smart cache '" + spec.streamId + "': stream ended after " + std::to_string(consumed) + " elements");
      ring[static_cast<std::size_t>(consumed) % cap] = *w;
      ++consumed;
    }
    for (std::size_t i = 0; i < spec.offsets.size(); ++i) {
      std::int64_t q = p + spec.offsets[i];
      Word w = 0;
      if (q >= 0 && q < size) {
        w = ring[static_cast<std::size_t>(q) % cap];
      } else if (spec.boundary == BoundaryPolicy::Clamp) {
        w = ring[static_cast<std::size_t>(std::clamp<std::int64_t>(q, 0, size - 1)) % cap];
      }
      co_await s.write(*outputs[i], w);
    }
  }
}

namespace {

struct DeviceArray {
  Field committed;
  Field staged;
  std::int64_t mark = 0;
  bool written = false;
};

bool inside(const Domain& d, const std::vector<std::int64_t>& idx) {
  for (std::size_t i = 0; i < d.lo.size(); ++i) {
    if (idx[i] < d.lo[i] || idx[i] > d.hi[i]) return false;
  }
  return true;
}

std::int64_t domain_size(const Domain& d) {
  std::int64_t n = 1;
  for (std::size_t i = 0; i < d.lo.size(); ++i) n *= std::max<std::int64_t>(0, d.hi[i] - d.lo[i] + 1);
  return n;
}

class Runner {
 public:
  Runner(const PipelineGraph& g, const HostState& initial, const SimOptions& opts) : g_(g), host_(initial), opts_(opts) {
    for (const auto& a : g_.arrays) {
      auto it = host_.find(a.name);
      if (it == host_.end()) throw ShapeMismatch("initial state lacks array '" + a.name + "'");
      if (!(it->second.shape == a.shape) || it->second.type != a.type) {
        throw ShapeMismatch("'" + a.name + "' is " + it->second.shape.str() + " but the graph expects " + a.shape.str());
      }
      DeviceArray d;
      d.committed = Field::array(a.type, a.shape);
      dev_[a.name] = std::move(d);
    }
  }

  SimResult run(std::int64_t nt) {
    if (nt < 0) throw Error("negative number of time steps");
    exec(opts_.plan ? *opts_.plan : g_.hostPlan, nt);
    SimResult r;
    r.host = std::move(host_);
    for (auto& [name, d] : dev_) r.device[name] = std::move(d.committed);
    for (const auto& [name, c] : report_.perKernel) report_.totals += c;
    r.report = std::move(report_);
    return r;
  }

 private:
  std::int64_t bytes(const std::string& a) const { return g_.array(a)->shape.size() * static_cast<std::int64_t>(sizeof(Word)); }

  void exec(const std::vector<HostOp>& ops, std::int64_t nt) {
    const FunctionalIR& ir = *g_.ir;
    for (const auto& op : ops) {
      switch (op.kind) {
        case HostOpKind::TransferToDev:
          for (const auto& a : op.arrays) {
            dev_.at(a).committed = host_.at(a);
            report_.bytesToDevice += bytes(a);
          }
          break;
        case HostOpKind::TransferToHost:
          for (const auto& a : op.arrays) {
            host_[a] = dev_.at(a).committed;
            report_.bytesToHost += bytes(a);
          }
          break;
        case HostOpKind::HostCompute:
          run_node(ir, ir.nodes[static_cast<std::size_t>(op.irNode)], host_);
          break;
        case HostOpKind::Launch:
          launch(op.processes);
          break;
        case HostOpKind::TimeLoop:
          for (std::int64_t t = 0; t < nt; ++t) {
            if (ir.hasTimeLoop) host_[ir.timeVar] = Field::scalar(Value::integer(static_cast<std::int32_t>(ir.timeLo + t * ir.timeStride)));
            exec(op.body, nt);
          }
          if (ir.hasTimeLoop) host_[ir.timeVar] = Field::scalar(Value::integer(static_cast<std::int32_t>(ir.timeLo + nt * ir.timeStride)));
          break;
      }
    }
  }

  Value scalar(const std::string& name) const {
    auto it = host_.find(name);
    if (it == host_.end() || !it->second.is_scalar()) return Value::zero(type_of(g_.ir->hostScope, name));
    return it->second.value();
  }

  /// Positions a compute kernel leaves unwritten travel as zeros; the
  /// memory they stand for must hold zeros too.
  void check_fill(const KernelNode& k) const {
    bool streamed = false;
    for (const auto& o : k.outputs) {
      for (const auto& c : o.channels) {
        const ChannelEdge* e = g_.channel(c);
        const KernelNode* cons = g_.kernel(e->consumer.process);
        if (!cons || cons->kind != ProcessKind::MemWrite) streamed = true;
      }
      if (!streamed) continue;
      const Field& f = dev_.at(o.array).committed;
      for (std::int64_t p = 0; p < f.shape.size(); ++p) {
        if (f.data[static_cast<std::size_t>(p)] != 0 && !inside(k.domain, f.shape.unlinear(p))) {
          throw LoweringError("'" + o.array + "' is streamed from '" + k.name +
                              "' but holds a nonzero value outside its domain at " + std::to_string(p));
        }
      }
    }
  }

  Task compute(Scheduler& s, const KernelNode& k) {
    const Elemental& e = *k.elemental;
    const std::size_t nreads = e.reads().size();
    std::vector<Value> in(k.inputs.size());
    std::vector<Value> out(e.writes().size());
    std::vector<Value> scalars;
    for (const auto& n : k.scalarArgs) scalars.push_back(scalar(n));
    Value acc;
    if (!k.accumulator.empty()) acc = scalar(k.accumulator);
    std::vector<const Field*> src(k.inputs.size());
    for (std::size_t i = 0; i < k.inputs.size(); ++i) {
      const KernelInput& ki = k.inputs[i];
      if (ki.source == InputSource::Memory) src[i] = ki.watermark ? &dev_.at(ki.array).staged : &dev_.at(ki.array).committed;
    }
    std::vector<Channel*> in_ch(k.inputs.size(), nullptr);
    for (std::size_t i = 0; i < k.inputs.size(); ++i) {
      if (k.inputs[i].source == InputSource::Channel) in_ch[i] = channels_.at(k.inputs[i].channel).get();
    }
    std::vector<std::vector<Channel*>> out_ch(k.outputs.size());
    for (std::size_t o = 0; o < k.outputs.size(); ++o) {
      for (const auto& c : k.outputs[o].channels) out_ch[o].push_back(channels_.at(c).get());
    }
    std::vector<BaseType> in_type(k.inputs.size());
    for (std::size_t i = 0; i < k.inputs.size(); ++i) in_type[i] = g_.array(k.inputs[i].array)->type;

    if (g_.variant == Variant::Baseline) {
      // Canonical loop order over the domain only.
      std::vector<std::int64_t> idx(k.domain.lo);
      std::vector<std::int64_t> at(idx.size());
      const std::int64_t n = domain_size(k.domain);
      for (std::int64_t c = 0; c < n; ++c) {
        for (std::size_t i = 0; i < nreads; ++i) {
          const KernelInput& ki = k.inputs[i];
          for (std::size_t d = 0; d < idx.size(); ++d) at[d] = idx[d] + ki.offset[d];
          if (!src[i]->shape.contains(at)) throw EvalError("'" + ki.array + "' read out of bounds in '" + k.name + "'");
          in[i] = src[i]->at(src[i]->shape.linear(at));
          ++s.counters().globalReads;
        }
        e.run(idx, in, scalars, out, &acc);
        for (std::size_t o = 0; o < k.outputs.size(); ++o) {
          Field& f = dev_.at(k.outputs[o].array).staged;
          f.set(f.shape.linear(idx), out[o]);
          ++s.counters().globalWrites;
        }
        for (std::size_t d = idx.size(); d-- > 0;) {
          if (++idx[d] <= k.domain.hi[d]) break;
          idx[d] = k.domain.lo[d];
        }
      }
    } else {
      const Shape& shape = stream_shape(k);
      const std::int64_t size = shape.size();
      std::vector<std::int64_t*> marks;
      for (const auto& o : k.outputs) {
        if (o.toMemory) marks.push_back(&dev_.at(o.array).mark);
      }
      for (std::int64_t p = 0; p < size; ++p) {
        auto idx = shape.unlinear(p);
        const bool guard = inside(k.domain, idx);
        for (std::size_t i = 0; i < k.inputs.size(); ++i) {
          const KernelInput& ki = k.inputs[i];
          if (in_ch[i]) {
            auto w = co_await s.read(*in_ch[i]);
            if (!w) throw Error("channel '" + ki.channel + "' ended early");
            in[i] = Value{in_type[i], *w};
            continue;
          }
          if (!guard) continue;
          const std::int64_t q = p + ki.linear;
          if (q < 0 || q >= size) throw EvalError("'" + ki.array + "' read out of bounds in '" + k.name + "'");
          if (ki.watermark) co_await s.until(dev_.at(ki.array).mark, q + 1);
          in[i] = src[i]->at(q);
          ++s.counters().globalReads;
        }
        if (guard) {
          e.run(idx, std::span<const Value>(in.data(), nreads), scalars, out, &acc);
        } else {
          for (std::size_t o = 0; o < out.size(); ++o) out[o] = Value::zero(k.outputs[o].type);
        }
        for (std::size_t o = 0; o < k.outputs.size(); ++o) {
          if (!k.outputs[o].toMemory || !guard) continue;
          dev_.at(k.outputs[o].array).staged.set(p, out[o]);
          ++s.counters().globalWrites;
        }
        for (auto* m : marks) *m = p + 1;
        for (std::size_t o = 0; o < k.outputs.size(); ++o) {
          for (Channel* c : out_ch[o]) co_await s.write(*c, out[o].bits);
        }
      }
    }
    if (!k.accumulator.empty()) {
      host_[k.accumulator] = Field::scalar(acc);
      ++s.counters().globalWrites;
    }
  }

  const Shape& stream_shape(const KernelNode& k) const {
    if (!k.inputs.empty()) return g_.array(k.inputs[0].array)->shape;
    if (!k.outputs.empty()) return g_.array(k.outputs[0].array)->shape;
    if (!k.streams.empty()) return g_.array(k.streams[0].first)->shape;
    throw LoweringError("kernel '" + k.name + "' touches no array");
  }

  Task mem_read(Scheduler& s, const KernelNode& k) {
    const std::int64_t size = stream_shape(k).size();
    std::vector<const Field*> src;
    std::vector<std::vector<Channel*>> chans;
    for (const auto& [a, cs] : k.streams) {
      src.push_back(&dev_.at(a).committed);
      chans.emplace_back();
      for (const auto& c : cs) chans.back().push_back(channels_.at(c).get());
    }
    for (std::int64_t p = 0; p < size; ++p) {
      for (std::size_t i = 0; i < src.size(); ++i) {
        Word w = src[i]->data[static_cast<std::size_t>(p)];
        ++s.counters().globalReads;
        for (Channel* c : chans[i]) co_await s.write(*c, w);
      }
    }
  }

  Task mem_write(Scheduler& s, const KernelNode& k) {
    const Shape& shape = stream_shape(k);
    std::vector<Field*> dst;
    std::vector<Channel*> chans;
    for (const auto& [a, cs] : k.streams) {
      dst.push_back(&dev_.at(a).staged);
      chans.push_back(channels_.at(cs.at(0)).get());
    }
    for (std::int64_t p = 0; p < shape.size(); ++p) {
      auto idx = shape.unlinear(p);
      for (std::size_t i = 0; i < dst.size(); ++i) {
        auto w = co_await s.read(*chans[i]);
        if (!w) throw Error("channel '" + chans[i]->name() + "' ended early");
        if (!inside(k.streamDomains[i], idx)) continue;
        dst[i]->data[static_cast<std::size_t>(p)] = *w;
        ++s.counters().globalWrites;
      }
    }
  }

  void launch(const std::vector<std::string>& procs) {
    std::set<std::string> written;
    for (const auto& p : procs) {
      const KernelNode* k = g_.kernel(p);
      if (!k) continue;
      for (const auto& o : k->outputs) written.insert(o.array);
      if (k->kind == ProcessKind::MemWrite) {
        for (const auto& st : k->streams) written.insert(st.first);
      }
      if (k->kind == ProcessKind::Compute && g_.variant != Variant::Baseline) check_fill(*k);
    }
    for (const auto& a : written) {
      DeviceArray& d = dev_.at(a);
      d.staged = d.committed;
      d.mark = 0;
    }
    channels_.clear();
    std::set<std::string> in_group(procs.begin(), procs.end());
    for (const auto& c : g_.channels) {
      if (in_group.count(c.producer.process)) channels_[c.name] = std::make_unique<Channel>(c.name, c.effective_capacity());
    }
    Scheduler s(opts_.sched);
    for (const auto& p : procs) {
      if (const KernelNode* k = g_.kernel(p)) {
        switch (k->kind) {
          case ProcessKind::Compute: s.spawn(p, compute(s, *k)); break;
          case ProcessKind::MemRead: s.spawn(p, mem_read(s, *k)); break;
          case ProcessKind::MemWrite: s.spawn(p, mem_write(s, *k)); break;
          case ProcessKind::SmartCache: break;
        }
      } else if (const SmartCacheSpec* sc = g_.cache(p)) {
        std::vector<Channel*> outs;
        for (const auto& c : sc->outputs) outs.push_back(channels_.at(c).get());
        s.spawn(p, smart_cache_run(s, *sc, *channels_.at(sc->input), outs));
      }
    }
    try {
      s.run();
    } catch (const DeadlockDetected& d) {
      report_.deadlock = d.blocked();
      throw;
    }
    for (std::size_t i = 0; i < s.names().size(); ++i) report_.perKernel[s.names()[i]] += s.counters_of(i);
    for (const auto& [name, c] : channels_) {
      ChannelStats& st = report_.channels[name];
      st.pushes += c->pushes();
      st.pops += c->pops();
      st.residual += static_cast<std::int64_t>(c->size());
    }
    for (const auto& a : written) {
      DeviceArray& d = dev_.at(a);
      d.committed = std::move(d.staged);
      d.staged = Field{};
    }
  }

  const PipelineGraph& g_;
  HostState host_;
  SimOptions opts_;
  std::map<std::string, DeviceArray> dev_;
  std::map<std::string, std::unique_ptr<Channel>> channels_;
  SimReport report_;
};

}  // namespace

SimResult run_pipeline(const PipelineGraph& g, const HostState& initial, std::int64_t nt, const SimOptions& opts) {
  return Runner(g, initial, opts).run(nt);
}

SimReport count_accesses(const PipelineGraph& g, std::int64_t nt) {
  SimReport r;
  auto groups = g.launch_groups();
  for (const auto& group : groups) {
    for (const auto& p : group) {
      ProcessCounters c;
      if (const SmartCacheSpec* sc = g.cache(p)) {
        c.channelPops = sc->size;
        c.channelPushes = sc->size * static_cast<std::int64_t>(sc->offsets.size());
      } else if (const KernelNode* k = g.kernel(p)) {
        const std::int64_t size = k->kind == ProcessKind::Compute
                                      ? g.array(k->inputs.empty() ? k->outputs.at(0).array : k->inputs[0].array)->shape.size()
                                      : g.array(k->streams.at(0).first)->shape.size();
        switch (k->kind) {
          case ProcessKind::Compute: {
            const std::int64_t d = domain_size(k->domain);
            for (const auto& in : k->inputs) {
              if (in.source == InputSource::Memory) c.globalReads += d;
              if (in.source == InputSource::Channel) c.channelPops += size;
            }
            for (const auto& o : k->outputs) {
              if (o.toMemory) c.globalWrites += d;
              c.channelPushes += size * static_cast<std::int64_t>(o.channels.size());
            }
            if (!k->accumulator.empty()) c.globalWrites += 1;
            break;
          }
          case ProcessKind::MemRead:
            for (const auto& st : k->streams) {
              c.globalReads += size;
              c.channelPushes += size * static_cast<std::int64_t>(st.second.size());
            }
            break;
          case ProcessKind::MemWrite:
            for (std::size_t i = 0; i < k->streams.size(); ++i) {
              c.globalWrites += domain_size(k->streamDomains[i]);
              c.channelPops += size;
            }
            break;
          case ProcessKind::SmartCache: break;
        }
      }
      c.globalReads *= nt;
      c.globalWrites *= nt;
      c.channelPushes *= nt;
      c.channelPops *= nt;
      r.perKernel[p] += c;
    }
  }
  for (const auto& [name, c] : r.perKernel) r.totals += c;
  return r;
}

std::string SimReport::to_json() const {
  using json = nlohmann::ordered_json;
  auto counters = [](const ProcessCounters& c) {
    return json{{"globalReads", c.globalReads},
                {"globalWrites", c.globalWrites},
                {"channelPushes", c.channelPushes},
                {"channelPops", c.channelPops},
                {"stallCycles", c.stallCycles}};
  };
  json j;
  j["accessUnit"] = "one scalar element";
  j["perKernel"] = json::object();
  for (const auto& [name, c] : perKernel) j["perKernel"][name] = counters(c);
  j["totals"] = counters(totals);
  j["channels"] = json::object();
  for (const auto& [name, c] : channels) {
    j["channels"][name] = {{"pushes", c.pushes}, {"pops", c.pops}, {"residual", c.residual}};
  }
  j["hostTransfers"] = {{"toDeviceBytes", bytesToDevice}, {"toHostBytes", bytesToHost}};
  j["deadlock"] = deadlock ? json(*deadlock) : json(nullptr);
  j["scheduleDependent"] = json::array({"stallCycles"});
  return j.dump(2);
}

}  // namespace sf
