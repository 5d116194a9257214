#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "streamfort/errors.hpp"
#include "streamfort/pipeline.hpp"

namespace sf {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::Channelized: return "channelized";
    case Variant::SmartCache: return "smartcache";
  }
  return "?";
}

std::optional<Variant> parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::Baseline;
  if (s == "channelized") return Variant::Channelized;
  if (s == "smartcache") return Variant::SmartCache;
  return std::nullopt;
}

SmartCacheSpec SmartCacheSpec::make(std::string streamId, std::int64_t size, std::vector<std::int64_t> offsets,
                                    bool syncOnly) {
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
  bool has_zero = std::binary_search(offsets.begin(), offsets.end(), 0);
  if (!syncOnly && !has_zero) throw LoweringError("smart cache '" + streamId + "' lacks the centre offset");
  if (offsets.empty()) throw LoweringError("smart cache '" + streamId + "' has no offsets");
  if (size < 1) throw LoweringError("smart cache '" + streamId + "' has an empty stream");
  SmartCacheSpec s;
  s.streamId = std::move(streamId);
  s.size = size;
  s.offsets = std::move(offsets);
  s.mpOff = std::max<std::int64_t>(s.offsets.back(), 0);
  s.mnOff = -std::min<std::int64_t>(s.offsets.front(), 0);
  s.bufferLen = s.mpOff + s.mnOff + 1;
  s.syncOnly = syncOnly;
  return s;
}

const KernelNode* PipelineGraph::kernel(const std::string& name) const {
  for (const auto& k : kernels) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

const ChannelEdge* PipelineGraph::channel(const std::string& name) const {
  for (const auto& c : channels) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const SmartCacheSpec* PipelineGraph::cache(const std::string& streamId) const {
  for (const auto& c : smartCaches) {
    if (c.streamId == streamId) return &c;
  }
  return nullptr;
}

const ArrayInfo* PipelineGraph::array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

namespace {

void collect_groups(const std::vector<HostOp>& ops, std::vector<std::vector<std::string>>& out) {
  for (const auto& op : ops) {
    if (op.kind == HostOpKind::Launch) out.push_back(op.processes);
    if (op.kind == HostOpKind::TimeLoop) collect_groups(op.body, out);
  }
}

std::set<std::string> names_in(const std::vector<Stmt>& code) {
  std::set<std::string> out;
  for_each_expr_in(code, [&](const Expr& e) {
    if (e.kind == ExprKind::Var || e.kind == ExprKind::ArrayRef) out.insert(e.name);
  });
  for_each_stmt(code, [&](const Stmt& s) {
    if (s.kind == StmtKind::Call) {
      for (const auto& a : s.args) {
        for_each_expr(a, [&](const Expr& e) {
          if (e.kind == ExprKind::Var || e.kind == ExprKind::ArrayRef) out.insert(e.name);
        });
      }
    }
  });
  return out;
}

std::string offset_tag(std::int64_t lin) {
  if (lin == 0) return "0";
  return (lin < 0 ? "m" : "p") + std::to_string(lin < 0 ? -lin : lin);
}

bool centre(const Offset& o) {
  return std::all_of(o.begin(), o.end(), [](int x) { return x == 0; });
}

class Lowerer {
 public:
  Lowerer(const FunctionalIR& ir, Variant v, const LowerOptions& opts) : ir_(ir), opts_(opts) {
    g_.variant = v;
    g_.capacity = opts.capacity;
    g_.budget = opts.budget;
  }

  PipelineGraph run() {
    if (opts_.capacity < 1) throw LoweringError("channel capacity must be at least 1");
    g_.ir = std::make_shared<FunctionalIR>(ir_);
    elems_.resize(ir_.nodes.size());
    for (std::size_t i = 0; i < ir_.nodes.size(); ++i) {
      if (ir_.nodes[i].kind != NodeKind::Seq) elems_[i] = std::make_shared<Elemental>(Elemental::compile(ir_.nodes[i]));
    }
    collect_arrays();
    std::vector<HostOp> body;
    std::vector<int> group;
    for (std::size_t i = 0; i < ir_.nodes.size(); ++i) {
      const IrNode& n = ir_.nodes[i];
      if (n.kind == NodeKind::Seq) {
        flush(group, body);
        auto touched = device_arrays_in(n.code);
        if (!touched.empty()) body.push_back(HostOp{HostOpKind::TransferToHost, touched, {}, -1, 0, {}});
        body.push_back(HostOp{HostOpKind::HostCompute, {}, {}, static_cast<int>(i), 0, {}});
        if (!touched.empty()) body.push_back(HostOp{HostOpKind::TransferToDev, touched, {}, -1, 0, {}});
        continue;
      }
      group.push_back(static_cast<int>(i));
      if (g_.variant == Variant::Baseline) flush(group, body);
    }
    flush(group, body);
    std::vector<std::string> all;
    for (const auto& a : g_.arrays) all.push_back(a.name);
    g_.hostPlan.push_back(HostOp{HostOpKind::TransferToDev, all, {}, -1, 0, {}});
    g_.hostPlan.push_back(HostOp{HostOpKind::TimeLoop, {}, {}, -1, ir_.timeSteps, std::move(body)});
    g_.hostPlan.push_back(HostOp{HostOpKind::TransferToHost, all, {}, -1, 0, {}});
    compute_skews();
    g_.validate();
    return std::move(g_);
  }

 private:
  void collect_arrays() {
    std::set<std::string> used;
    for (std::size_t i = 0; i < ir_.nodes.size(); ++i) {
      if (!elems_[i]) continue;
      for (const auto& r : elems_[i]->reads()) used.insert(r.array);
      for (const auto& w : elems_[i]->writes()) used.insert(w);
    }
    for (const auto& a : ir_.arrays()) {
      if (used.count(a)) g_.arrays.push_back(ArrayInfo{a, ir_.type_of(a), ir_.shape_of(a)});
    }
  }

  std::vector<std::string> device_arrays_in(const std::vector<Stmt>& code) const {
    auto names = names_in(code);
    std::vector<std::string> out;
    for (const auto& a : g_.arrays) {
      if (names.count(a.name)) out.push_back(a.name);
    }
    return out;
  }

  const Shape& shape(const std::string& a) const { return g_.array(a)->shape; }

  std::int64_t linear(const Shape& s, const Offset& o) const {
    std::int64_t lin = 0;
    std::int64_t stride = 1;
    for (std::size_t d = s.rank(); d-- > 0;) {
      if (d > 0 && (o[d] >= s.extent(d) || -o[d] >= s.extent(d))) {
        std::string text;
        for (std::size_t i = 0; i < o.size(); ++i) text += (i ? "," : "") + std::to_string(o[i]);
        throw NonLinearizableStencil("offset (" + text + ") leaves the row window of extent " +
                                     std::to_string(s.extent(d)));
      }
      lin += o[d] * stride;
      stride *= s.extent(d);
    }
    return lin;
  }

  /// Whether `array` written by node `producer` of `group` must reach
  /// global memory regardless of in-group consumers.
  bool live_out(const std::string& array, int producer, const std::vector<int>& group) const {
    int writers = 0;
    bool consumed = false;
    for (int k : group) {
      const auto& e = *elems_[static_cast<std::size_t>(k)];
      if (std::find(e.writes().begin(), e.writes().end(), array) != e.writes().end()) ++writers;
      if (k > producer) {
        for (const auto& r : e.reads()) consumed = consumed || r.array == array;
      }
    }
    if (writers > 1 || !consumed) return true;
    for (std::size_t i = 0; i < ir_.nodes.size(); ++i) {
      if (std::find(group.begin(), group.end(), static_cast<int>(i)) != group.end()) continue;
      if (!elems_[i]) {
        if (names_in(ir_.nodes[i].code).count(array)) return true;
        continue;
      }
      for (const auto& r : elems_[i]->reads()) {
        if (r.array == array) return true;
      }
    }
    for (const auto& c : ir_.carried) {
      if (c.array == array) return true;
    }
    if (names_in(ir_.epilogue).count(array)) return true;
    return !ir_.hasTimeLoop;
  }

  std::string unique(const std::string& base) {
    std::string n = base;
    for (int i = 2; taken_.count(n); ++i) n = base + "_" + std::to_string(i);
    taken_.insert(n);
    return n;
  }

  KernelNode compute_kernel(int node) {
    const IrNode& n = ir_.nodes[static_cast<std::size_t>(node)];
    KernelNode k;
    k.name = unique(n.name);
    k.kind = ProcessKind::Compute;
    k.irNode = node;
    k.elemental = elems_[static_cast<std::size_t>(node)];
    k.domain = n.domain;
    k.scalarArgs = k.elemental->scalar_inputs();
    if (n.kind == NodeKind::Fold) k.accumulator = n.accumulator;
    for (std::size_t i = 0; i < k.elemental->writes().size(); ++i) {
      k.outputs.push_back(KernelOutput{k.elemental->writes()[i], k.elemental->write_types()[i], false, {}});
    }
    return k;
  }

  std::string connect(const std::string& producer, const std::string& array, const std::string& consumer,
                      const std::string& port) {
    ChannelEdge c;
    c.name = unique("ch_" + producer + "_" + array + "_" + consumer);
    c.producer = {producer, array};
    c.consumer = {consumer, port};
    c.capacity = opts_.capacity;
    c.elemType = g_.array(array)->type;
    c.array = array;
    g_.channels.push_back(c);
    return c.name;
  }

  void flush(std::vector<int>& group, std::vector<HostOp>& body) {
    if (group.empty()) return;
    std::vector<std::string> procs;
    switch (g_.variant) {
      case Variant::Baseline: procs = baseline(group); break;
      case Variant::Channelized: procs = channelized(group); break;
      case Variant::SmartCache: procs = smart_cache(group); break;
    }
    body.push_back(HostOp{HostOpKind::Launch, {}, procs, -1, 0, {}});
    group.clear();
  }

  void add_mem_ports(const KernelNode& k) {
    std::set<std::string> seen;
    for (const auto& in : k.inputs) {
      if (in.source == InputSource::Memory && seen.insert(in.array).second) {
        g_.memPorts.push_back(MemPort{k.name, in.array, MemDir::Read});
      }
    }
    for (const auto& o : k.outputs) {
      if (o.toMemory) g_.memPorts.push_back(MemPort{k.name, o.array, MemDir::Write});
    }
    if (!k.accumulator.empty()) g_.memPorts.push_back(MemPort{k.name, k.accumulator, MemDir::Write});
  }

  std::vector<std::string> baseline(const std::vector<int>& group) {
    std::vector<std::string> procs;
    for (int node : group) {
      KernelNode k = compute_kernel(node);
      for (const auto& r : k.elemental->reads()) {
        k.inputs.push_back(KernelInput{r.array, r.offset, linear(shape(r.array), r.offset), InputSource::Memory, "", false});
      }
      for (auto& o : k.outputs) o.toMemory = true;
      add_mem_ports(k);
      procs.push_back(k.name);
      g_.kernels.push_back(std::move(k));
    }
    return procs;
  }

  const Shape& group_shape(const std::vector<int>& group) const {
    const Shape* s = nullptr;
    for (int node : group) {
      const auto& e = *elems_[static_cast<std::size_t>(node)];
      std::vector<std::string> names;
      for (const auto& r : e.reads()) names.push_back(r.array);
      for (const auto& w : e.writes()) names.push_back(w);
      for (const auto& n : names) {
        const Shape& sh = shape(n);
        if (!s) s = &sh;
        if (!(sh == *s)) {
          throw LoweringError("streaming needs one grid shape per launch group; '" + n + "' is " + sh.str() +
                              " but the group streams " + s->str());
        }
      }
    }
    if (!s) throw LoweringError("launch group without arrays");
    return *s;
  }

  void mark_recirculated(const std::vector<int>& group) {
    std::set<std::string> read_first;
    std::set<std::string> written;
    for (int node : group) {
      const auto& e = *elems_[static_cast<std::size_t>(node)];
      for (const auto& r : e.reads()) {
        if (!written.count(r.array)) read_first.insert(r.array);
      }
      for (const auto& w : e.writes()) written.insert(w);
    }
    for (const auto& a : read_first) {
      if (written.count(a) && std::find(g_.recirculated.begin(), g_.recirculated.end(), a) == g_.recirculated.end()) {
        g_.recirculated.push_back(a);
      }
    }
  }

  std::vector<std::string> channelized(const std::vector<int>& group) {
    const Shape& s = group_shape(group);
    mark_recirculated(group);
    std::map<std::string, std::size_t> producer;  // array -> index into g_.kernels
    std::vector<std::string> procs;
    for (int node : group) {
      KernelNode k = compute_kernel(node);
      for (const auto& r : k.elemental->reads()) {
        KernelInput in{r.array, r.offset, linear(s, r.offset), InputSource::Memory, "", false};
        auto p = producer.find(r.array);
        if (p != producer.end()) {
          KernelNode& src = g_.kernels[p->second];
          KernelOutput& out = *std::find_if(src.outputs.begin(), src.outputs.end(),
                                            [&](const KernelOutput& o) { return o.array == r.array; });
          if (centre(r.offset)) {
            in.source = InputSource::Channel;
            in.channel = connect(src.name, r.array, k.name, r.array);
            out.channels.push_back(in.channel);
          } else {
            in.watermark = true;
            out.toMemory = true;
          }
        }
        k.inputs.push_back(in);
      }
      for (auto& o : k.outputs) o.toMemory = o.toMemory || live_out(o.array, node, group);
      procs.push_back(k.name);
      g_.kernels.push_back(std::move(k));
      for (const auto& w : g_.kernels.back().elemental->writes()) producer[w] = g_.kernels.size() - 1;
    }
    for (const auto& name : procs) add_mem_ports(*g_.kernel(name));
    return procs;
  }

  std::vector<std::string> smart_cache(const std::vector<int>& group) {
    const Shape& s = group_shape(group);
    mark_recirculated(group);
    const std::int64_t size = s.size();
    const std::int64_t stride = s.rank() > 1 ? s.row_stride() : 1;
    std::string reader = unique("mem_read");
    std::string writer = unique("mem_write");
    KernelNode rd;
    rd.name = reader;
    rd.kind = ProcessKind::MemRead;
    KernelNode wr;
    wr.name = writer;
    wr.kind = ProcessKind::MemWrite;
    std::map<std::string, std::size_t> producer;  // array -> index into computed
    std::vector<KernelNode> computed;
    std::vector<std::vector<std::string>> order;  // caches then kernel

    auto feed = [&](const std::string& array, const std::string& consumer, const std::string& port) {
      auto p = producer.find(array);
      if (p != producer.end()) {
        KernelNode& src = computed[p->second];
        std::string ch = connect(src.name, array, consumer, port);
        for (auto& o : src.outputs) {
          if (o.array == array) o.channels.push_back(ch);
        }
        return ch;
      }
      std::string ch = connect(reader, array, consumer, port);
      auto it = std::find_if(rd.streams.begin(), rd.streams.end(), [&](const auto& st) { return st.first == array; });
      if (it == rd.streams.end()) {
        rd.streams.push_back({array, {ch}});
      } else {
        it->second.push_back(ch);
      }
      return ch;
    };

    for (int node : group) {
      KernelNode k = compute_kernel(node);
      const auto& reads = k.elemental->reads();
      std::vector<std::string> arrays;
      bool stencil = false;
      for (const auto& r : reads) {
        if (std::find(arrays.begin(), arrays.end(), r.array) == arrays.end()) arrays.push_back(r.array);
        stencil = stencil || !centre(r.offset);
      }
      k.inputs.resize(reads.size());
      std::vector<KernelInput> discards;
      std::vector<std::string> procs;
      std::vector<std::size_t> kernel_caches;
      for (const auto& a : arrays) {
        std::vector<std::int64_t> lins;
        bool off_centre = false;
        for (const auto& r : reads) {
          if (r.array != a) continue;
          lins.push_back(linear(s, r.offset));
          off_centre = off_centre || !centre(r.offset);
        }
        if (!stencil) {
          std::size_t i = static_cast<std::size_t>(
              std::find_if(reads.begin(), reads.end(), [&](const ElementalRead& r) { return r.array == a; }) -
              reads.begin());
          k.inputs[i] = KernelInput{a, reads[i].offset, 0, InputSource::Channel, feed(a, k.name, a), false};
          continue;
        }
        if (off_centre) lins.push_back(0);
        std::string id = unique("sc_" + a + "_" + k.name);
        SmartCacheSpec spec = SmartCacheSpec::make(id, size, lins, !off_centre);
        if (spec.bufferLen > g_.budget) throw BudgetExceeded(spec.bufferLen, g_.budget);
        spec.array = a;
        spec.consumer = k.name;
        spec.rowStride = stride;
        spec.boundary = opts_.boundary;
        spec.input = feed(a, id, "in");
        for (std::int64_t lin : spec.offsets) {
          std::string ch = connect(id, a, k.name, a + "@" + offset_tag(lin));
          spec.outputs.push_back(ch);
          bool used = false;
          for (std::size_t i = 0; i < reads.size(); ++i) {
            if (reads[i].array == a && linear(s, reads[i].offset) == lin) {
              k.inputs[i] = KernelInput{a, reads[i].offset, lin, InputSource::Channel, ch, false};
              used = true;
            }
          }
          if (!used) {
            KernelInput d{a, Offset(s.rank(), 0), lin, InputSource::Channel, ch, false};
            d.discard = true;
            discards.push_back(d);
          }
        }
        procs.push_back(id);
        kernel_caches.push_back(g_.smartCaches.size());
        g_.smartCaches.push_back(std::move(spec));
      }
      std::int64_t max_m = 0;
      for (std::size_t c : kernel_caches) max_m = std::max(max_m, g_.smartCaches[c].mpOff);
      for (std::size_t c : kernel_caches) g_.smartCaches[c].alignDelay = max_m - g_.smartCaches[c].mpOff;
      for (auto& d : discards) k.inputs.push_back(d);
      procs.push_back(k.name);
      order.push_back(procs);
      computed.push_back(std::move(k));
      for (const auto& w : computed.back().elemental->writes()) producer[w] = computed.size() - 1;
    }
    for (std::size_t i = 0; i < computed.size(); ++i) {
      KernelNode& k = computed[i];
      for (auto& o : k.outputs) {
        if (!live_out(o.array, k.irNode, group)) continue;
        if (std::find_if(wr.streams.begin(), wr.streams.end(), [&](const auto& st) { return st.first == o.array; }) !=
            wr.streams.end()) {
          continue;
        }
        std::string ch = connect(k.name, o.array, writer, o.array);
        o.channels.push_back(ch);
        wr.streams.push_back({o.array, {ch}});
        wr.streamDomains.push_back(k.domain);
      }
    }
    std::vector<std::string> procs;
    if (!rd.streams.empty()) {
      procs.push_back(reader);
      for (const auto& st : rd.streams) g_.memPorts.push_back(MemPort{reader, st.first, MemDir::Read});
      g_.kernels.push_back(std::move(rd));
    }
    for (std::size_t i = 0; i < computed.size(); ++i) {
      add_mem_ports(computed[i]);
      for (const auto& p : order[i]) procs.push_back(p);
      g_.kernels.push_back(std::move(computed[i]));
    }
    if (!wr.streams.empty()) {
      procs.push_back(writer);
      for (const auto& st : wr.streams) g_.memPorts.push_back(MemPort{writer, st.first, MemDir::Write});
      g_.kernels.push_back(std::move(wr));
    }
    return procs;
  }

  /// Each process runs a fixed number of positions behind the stream
  /// sources (its lag). A channel between two processes whose lags differ
  /// by more than the consumer's own lookahead must hold the difference.
  void compute_skews() {
    std::vector<std::vector<std::string>> groups;
    collect_groups(g_.hostPlan, groups);
    for (const auto& group : groups) {
      std::map<std::string, std::int64_t> lag;
      auto look = [&](const ChannelEdge& c) -> std::int64_t {
        const SmartCacheSpec* sc = g_.cache(c.consumer.process);
        return sc ? sc->mpOff + sc->alignDelay : 0;
      };
      for (const auto& p : group) {
        std::int64_t l = 0;
        for (const auto& c : g_.channels) {
          if (c.consumer.process == p && lag.count(c.producer.process)) {
            l = std::max(l, lag[c.producer.process] + look(c));
          }
        }
        if (const KernelNode* k = g_.kernel(p)) {
          for (const auto& in : k->inputs) {
            if (!in.watermark) continue;
            for (const auto& q : group) {
              const KernelNode* src = g_.kernel(q);
              if (!src || q == p || !lag.count(q)) continue;
              for (const auto& o : src->outputs) {
                if (o.array == in.array && o.toMemory) l = std::max(l, lag[q] + std::max<std::int64_t>(in.linear, 0));
              }
            }
          }
        }
        lag[p] = l;
      }
      for (auto& c : g_.channels) {
        if (!lag.count(c.consumer.process) || !lag.count(c.producer.process)) continue;
        c.skew = std::max<std::int64_t>(0, lag[c.consumer.process] - lag[c.producer.process] - look(c));
      }
    }
  }

  const FunctionalIR& ir_;
  LowerOptions opts_;
  PipelineGraph g_;
  std::vector<std::shared_ptr<const Elemental>> elems_;
  std::set<std::string> taken_;
};

nlohmann::ordered_json domain_json(const Domain& d) {
  auto j = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < d.lo.size(); ++i) j.push_back({d.lo[i], d.hi[i]});
  return j;
}

const char* kind_name(ProcessKind k) {
  switch (k) {
    case ProcessKind::Compute: return "compute";
    case ProcessKind::MemRead: return "mem_read";
    case ProcessKind::MemWrite: return "mem_write";
    case ProcessKind::SmartCache: return "smart_cache";
  }
  return "?";
}

nlohmann::ordered_json plan_json(const std::vector<HostOp>& ops) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& op : ops) {
    nlohmann::ordered_json j;
    switch (op.kind) {
      case HostOpKind::TransferToDev: j["op"] = "transfer_to_device"; j["arrays"] = op.arrays; break;
      case HostOpKind::TransferToHost: j["op"] = "transfer_to_host"; j["arrays"] = op.arrays; break;
      case HostOpKind::Launch: j["op"] = "launch"; j["processes"] = op.processes; break;
      case HostOpKind::HostCompute: j["op"] = "host_compute"; j["node"] = op.irNode; break;
      case HostOpKind::TimeLoop:
        j["op"] = "time_loop";
        j["count"] = op.count;
        j["body"] = plan_json(op.body);
        break;
    }
    out.push_back(j);
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> PipelineGraph::launch_groups() const {
  std::vector<std::vector<std::string>> out;
  collect_groups(hostPlan, out);
  return out;
}

PipelineGraph lower(const FunctionalIR& ir, Variant variant, const LowerOptions& opts) {
  return Lowerer(ir, variant, opts).run();
}

void set_capacity(PipelineGraph& g, std::int64_t capacity) {
  if (capacity < 1) throw LoweringError("channel capacity must be at least 1");
  g.capacity = capacity;
  for (auto& c : g.channels) c.capacity = capacity;
}

void PipelineGraph::validate() const {
  std::map<std::string, int> produced;
  std::map<std::string, int> consumed;
  for (const auto& k : kernels) {
    for (const auto& in : k.inputs) {
      if (in.source == InputSource::Channel) ++consumed[in.channel];
    }
    for (const auto& o : k.outputs) {
      for (const auto& c : o.channels) ++produced[c];
    }
    for (const auto& st : k.streams) {
      for (const auto& c : st.second) ++(k.kind == ProcessKind::MemRead ? produced : consumed)[c];
    }
    if (variant == Variant::SmartCache && k.kind == ProcessKind::Compute) {
      for (const auto& in : k.inputs) {
        if (in.source == InputSource::Memory) throw LoweringError("kernel '" + k.name + "' reads global memory");
      }
      for (const auto& o : k.outputs) {
        if (o.toMemory) throw LoweringError("kernel '" + k.name + "' writes global memory");
      }
    }
  }
  for (const auto& sc : smartCaches) {
    ++consumed[sc.input];
    for (const auto& c : sc.outputs) ++produced[c];
    if (sc.outputs.size() != sc.offsets.size()) throw LoweringError("smart cache '" + sc.streamId + "' port count");
  }
  if (variant == Variant::Baseline && !channels.empty()) throw LoweringError("baseline graph has channels");
  for (const auto& c : channels) {
    if (produced[c.name] != 1 || consumed[c.name] != 1) throw LoweringError("dangling channel '" + c.name + "'");
    const ArrayInfo* a = array(c.array);
    if (!a || a->type != c.elemType) throw LoweringError("channel '" + c.name + "' element type mismatch");
    if (!kernel(c.producer.process) && !cache(c.producer.process)) {
      throw LoweringError("channel '" + c.name + "' has no producer");
    }
    if (!kernel(c.consumer.process) && !cache(c.consumer.process)) {
      throw LoweringError("channel '" + c.name + "' has no consumer");
    }
  }
  for (const auto& [name, n] : produced) {
    if (!channel(name)) throw LoweringError("port bound to unknown channel '" + name + "'");
  }
  for (const auto& [name, n] : consumed) {
    if (!channel(name)) throw LoweringError("port bound to unknown channel '" + name + "'");
  }
}

std::string PipelineGraph::to_json() const {
  using json = nlohmann::ordered_json;
  json j;
  j["variant"] = to_string(variant);
  j["capacity"] = capacity;
  j["budget"] = budget;
  j["arrays"] = json::array();
  for (const auto& a : arrays) {
    json s = json::array();
    for (std::size_t d = 0; d < a.shape.rank(); ++d) s.push_back({a.shape.lo[d], a.shape.hi[d]});
    j["arrays"].push_back({{"name", a.name}, {"type", sf::to_string(a.type)}, {"shape", s}});
  }
  j["kernels"] = json::array();
  for (const auto& k : kernels) {
    json kj;
    kj["name"] = k.name;
    kj["kind"] = kind_name(k.kind);
    if (k.kind == ProcessKind::Compute) {
      kj["domain"] = domain_json(k.domain);
      kj["inputs"] = json::array();
      for (const auto& in : k.inputs) {
        json ij{{"array", in.array}, {"offset", in.offset}, {"linear", in.linear}};
        ij["source"] = in.source == InputSource::Memory ? "memory" : "channel";
        if (in.source == InputSource::Channel) ij["channel"] = in.channel;
        if (in.watermark) ij["watermark"] = true;
        if (in.discard) ij["discard"] = true;
        kj["inputs"].push_back(ij);
      }
      kj["outputs"] = json::array();
      for (const auto& o : k.outputs) {
        kj["outputs"].push_back({{"array", o.array}, {"toMemory", o.toMemory}, {"channels", o.channels}});
      }
      kj["scalarArgs"] = k.scalarArgs;
      if (!k.accumulator.empty()) kj["accumulator"] = k.accumulator;
    } else {
      kj["streams"] = json::array();
      for (const auto& st : k.streams) kj["streams"].push_back({{"array", st.first}, {"channels", st.second}});
    }
    j["kernels"].push_back(kj);
  }
  j["channels"] = json::array();
  for (const auto& c : channels) {
    j["channels"].push_back({{"name", c.name},
                             {"producer", c.producer.process + "." + c.producer.port},
                             {"consumer", c.consumer.process + "." + c.consumer.port},
                             {"capacity", c.capacity},
                             {"skew", c.skew},
                             {"type", sf::to_string(c.elemType)},
                             {"array", c.array}});
  }
  j["smartCaches"] = json::array();
  for (const auto& s : smartCaches) {
    j["smartCaches"].push_back({{"streamId", s.streamId},
                                {"array", s.array},
                                {"consumer", s.consumer},
                                {"size", s.size},
                                {"rowStride", s.rowStride},
                                {"offsets", s.offsets},
                                {"MPOff", s.mpOff},
                                {"MNOff", s.mnOff},
                                {"bufferLen", s.bufferLen},
                                {"syncOnly", s.syncOnly},
                                {"alignDelay", s.alignDelay},
                                {"boundary", s.boundary == BoundaryPolicy::Clamp ? "clamp" : "zero"},
                                {"input", s.input},
                                {"outputs", s.outputs}});
  }
  j["memPorts"] = json::array();
  for (const auto& m : memPorts) {
    j["memPorts"].push_back({{"process", m.process}, {"array", m.array}, {"dir", m.dir == MemDir::Read ? "read" : "write"}});
  }
  j["hostPlan"] = plan_json(hostPlan);
  json rec = json::object();
  for (const auto& a : recirculated) rec[a] = "global";
  j["recirculation"] = rec;
  return j.dump(2);
}

}  // namespace sf
