#include <algorithm>

#include "streamfort/pipeline.hpp"

namespace sf {

namespace {

void names(const std::vector<Stmt>& code, std::set<std::string>& read, std::set<std::string>& written) {
  for_each_expr_in(code, [&](const Expr& e) {
    if (e.kind == ExprKind::Var || e.kind == ExprKind::ArrayRef) read.insert(e.name);
  });
  for_each_stmt(code, [&](const Stmt& s) {
    if (s.kind == StmtKind::Assign) written.insert(s.lhs->name);
    if (s.kind == StmtKind::Call) {
      // Actual arguments may be updated by the callee.
      for (const auto& a : s.args) {
        if (a->kind == ExprKind::Var || a->kind == ExprKind::ArrayRef) {
          read.insert(a->name);
          written.insert(a->name);
        }
      }
    }
  });
}

std::vector<const KernelNode*> step_kernels(const PipelineGraph& g) {
  std::vector<const KernelNode*> out;
  for (const auto& group : g.launch_groups()) {
    for (const auto& p : group) {
      const KernelNode* k = g.kernel(p);
      if (k && k->kind == ProcessKind::Compute) out.push_back(k);
    }
  }
  return out;
}

bool covers(const Domain& outer, const Domain& inner, const Offset& shift) {
  for (std::size_t d = 0; d < inner.lo.size(); ++d) {
    if (inner.lo[d] + shift[d] < outer.lo[d] || inner.hi[d] + shift[d] > outer.hi[d]) return false;
  }
  return true;
}

bool covers_shape(const Domain& d, const Shape& s) {
  for (std::size_t i = 0; i < s.rank(); ++i) {
    if (d.lo[i] > s.lo[i] || d.hi[i] < s.hi[i]) return false;
  }
  return true;
}

std::set<std::string> touched(const PipelineGraph& g, int node) {
  std::set<std::string> r;
  std::set<std::string> w;
  names(g.ir->nodes[static_cast<std::size_t>(node)].code, r, w);
  r.insert(w.begin(), w.end());
  std::set<std::string> out;
  for (const auto& a : g.arrays) {
    if (r.count(a.name)) out.insert(a.name);
  }
  return out;
}

std::vector<std::string> list(const std::set<std::string>& s) { return {s.begin(), s.end()}; }

std::vector<std::string> all_arrays(const PipelineGraph& g) {
  std::vector<std::string> out;
  for (const auto& a : g.arrays) out.push_back(a.name);
  return out;
}

const HostOp* time_loop(const PipelineGraph& g) {
  for (const auto& op : g.hostPlan) {
    if (op.kind == HostOpKind::TimeLoop) return &op;
  }
  return nullptr;
}

}  // namespace

HostUse host_use(const FunctionalIR& ir) {
  HostUse u;
  std::set<std::string> r;
  names(ir.prologue, r, u.initialized);
  for (const auto& n : ir.nodes) {
    if (n.kind == NodeKind::Seq) names(n.code, u.readInLoop, u.writtenInLoop);
  }
  std::set<std::string> w;
  names(ir.epilogue, u.readAfter, w);
  u.readAfter.insert(w.begin(), w.end());
  return u;
}

TransferSchedule minimize_transfers(const PipelineGraph& g, const HostUse& use) {
  TransferSchedule s;
  auto kernels = step_kernels(g);
  for (const auto& a : g.arrays) {
    bool dev_read = false;
    bool dev_written = false;
    bool uncovered = false;
    bool full = false;
    for (std::size_t i = 0; i < kernels.size(); ++i) {
      const Elemental& e = *kernels[i]->elemental;
      for (const auto& r : e.reads()) {
        if (r.array != a.name) continue;
        dev_read = true;
        bool ok = false;
        for (std::size_t j = 0; j < i && !ok; ++j) {
          const Elemental& p = *kernels[j]->elemental;
          for (std::size_t o = 0; o < p.writes().size(); ++o) {
            ok = ok || (p.writes()[o] == a.name && p.must_write(o) && covers(kernels[j]->domain, kernels[i]->domain, r.offset));
          }
        }
        uncovered = uncovered || !ok;
      }
      for (std::size_t o = 0; o < e.writes().size(); ++o) {
        if (e.writes()[o] != a.name) continue;
        dev_written = true;
        full = full || (e.must_write(o) && covers_shape(kernels[i]->domain, a.shape));
      }
    }
    bool host_in_loop = use.readInLoop.count(a.name) || use.writtenInLoop.count(a.name);
    bool host_reads = host_in_loop || use.readAfter.count(a.name);
    // A partially written array copied back must start from the host values.
    bool needs_input = uncovered || (dev_written && host_reads && !full);
    if (use.writtenInLoop.count(a.name) && dev_read) {
      s.perStepToDevice.insert(a.name);
    } else if (needs_input) {
      s.onceToDevice.insert(a.name);
    }
    if (dev_written) {
      if (host_in_loop) {
        s.perStepToHost.insert(a.name);
      } else if (use.readAfter.count(a.name)) {
        s.onceToHost.insert(a.name);
      }
    }
  }
  return s;
}

std::vector<HostOp> plan_with(const PipelineGraph& g, const TransferSchedule& s) {
  std::vector<HostOp> plan;
  std::set<std::string> first = s.onceToDevice;
  first.insert(s.perStepToDevice.begin(), s.perStepToDevice.end());
  if (!first.empty()) plan.push_back(HostOp{HostOpKind::TransferToDev, list(first), {}, -1, 0, {}});
  if (const HostOp* loop = time_loop(g)) {
    HostOp l{HostOpKind::TimeLoop, {}, {}, -1, loop->count, {}};
    for (const auto& op : loop->body) {
      if (op.kind == HostOpKind::Launch) l.body.push_back(op);
      if (op.kind != HostOpKind::HostCompute) continue;
      auto t = touched(g, op.irNode);
      std::set<std::string> in;
      std::set<std::string> out;
      for (const auto& a : t) {
        if (s.perStepToHost.count(a)) in.insert(a);
        if (s.perStepToDevice.count(a)) out.insert(a);
      }
      if (!in.empty()) l.body.push_back(HostOp{HostOpKind::TransferToHost, list(in), {}, -1, 0, {}});
      l.body.push_back(op);
      if (!out.empty()) l.body.push_back(HostOp{HostOpKind::TransferToDev, list(out), {}, -1, 0, {}});
    }
    plan.push_back(std::move(l));
  }
  std::set<std::string> last = s.onceToHost;
  last.insert(s.perStepToHost.begin(), s.perStepToHost.end());
  if (!last.empty()) plan.push_back(HostOp{HostOpKind::TransferToHost, list(last), {}, -1, 0, {}});
  return plan;
}

std::vector<HostOp> plan_transfer_everything(const PipelineGraph& g) {
  auto all = all_arrays(g);
  std::vector<HostOp> plan;
  plan.push_back(HostOp{HostOpKind::TransferToDev, all, {}, -1, 0, {}});
  if (const HostOp* loop = time_loop(g)) {
    HostOp l{HostOpKind::TimeLoop, {}, {}, -1, loop->count, {}};
    l.body.push_back(HostOp{HostOpKind::TransferToDev, all, {}, -1, 0, {}});
    for (const auto& op : loop->body) {
      if (op.kind == HostOpKind::Launch) l.body.push_back(op);
      if (op.kind != HostOpKind::HostCompute) continue;
      l.body.push_back(HostOp{HostOpKind::TransferToHost, all, {}, -1, 0, {}});
      l.body.push_back(op);
      l.body.push_back(HostOp{HostOpKind::TransferToDev, all, {}, -1, 0, {}});
    }
    l.body.push_back(HostOp{HostOpKind::TransferToHost, all, {}, -1, 0, {}});
    plan.push_back(std::move(l));
  }
  plan.push_back(HostOp{HostOpKind::TransferToHost, all, {}, -1, 0, {}});
  return plan;
}

}  // namespace sf
