#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "streamfort/analyzer.hpp"
#include "streamfort/elemental.hpp"

namespace sf {

enum class Variant { Baseline, Channelized, SmartCache };
const char* to_string(Variant v);
/// Accepts "baseline", "channelized", "smartcache".
std::optional<Variant> parse_variant(const std::string& s);

enum class BoundaryPolicy { Clamp, Zero };

enum class ProcessKind { Compute, MemRead, MemWrite, SmartCache };

/// Endpoint of a channel: a process and the port name on it.
struct PortRef {
  std::string process;
  std::string port;
};

struct ChannelEdge {
  std::string name;
  PortRef producer;
  PortRef consumer;
  std::int64_t capacity = 64;
  /// Extra depth on paths whose consumer runs behind the producer by a
  /// fixed number of elements. Computed by lower(); never below zero.
  std::int64_t skew = 0;
  BaseType elemType = BaseType::Real;
  std::string array;

  std::int64_t effective_capacity() const { return capacity + skew; }
};

enum class InputSource { Memory, Channel };

/// One value per position consumed by a compute kernel.
struct KernelInput {
  std::string array;
  Offset offset;
  std::int64_t linear = 0;
  InputSource source = InputSource::Memory;
  std::string channel;
  /// Memory read of an array produced earlier in the same launch group:
  /// wait until the producer has passed the position.
  bool watermark = false;
  /// Centre element delivered by a smart cache that the body never uses.
  bool discard = false;
};

struct KernelOutput {
  std::string array;
  BaseType type = BaseType::Real;
  bool toMemory = false;
  std::vector<std::string> channels;
};

struct KernelNode {
  std::string name;
  ProcessKind kind = ProcessKind::Compute;
  int irNode = -1;
  std::shared_ptr<const Elemental> elemental;
  Domain domain;
  std::vector<KernelInput> inputs;  // elemental->reads() first, then discards
  std::vector<KernelOutput> outputs;  // parallel to elemental->writes()
  std::vector<std::string> scalarArgs;
  /// Fold kernels: host scalar receiving the result.
  std::string accumulator;
  /// MemRead: array -> channels fed; MemWrite: array -> channel drained.
  std::vector<std::pair<std::string, std::vector<std::string>>> streams;
  /// MemWrite: domain of the kernel producing each stream.
  std::vector<Domain> streamDomains;
};

struct SmartCacheSpec {
  std::string streamId;
  std::string array;
  std::string consumer;
  std::int64_t size = 0;
  std::int64_t rowStride = 0;
  std::vector<std::int64_t> offsets;  // sorted linear offsets
  std::int64_t mpOff = 0;
  std::int64_t mnOff = 0;
  std::int64_t bufferLen = 1;
  bool syncOnly = false;
  /// Additional elements consumed before the first tuple so that all
  /// caches feeding one kernel emit in lockstep.
  std::int64_t alignDelay = 0;
  BoundaryPolicy boundary = BoundaryPolicy::Clamp;
  std::string input;
  std::vector<std::string> outputs;  // one channel per offset, same order

  /// Validates the offset bookkeeping; fills mpOff, mnOff, bufferLen.
  static SmartCacheSpec make(std::string streamId, std::int64_t size, std::vector<std::int64_t> offsets,
                             bool syncOnly = false);
};

enum class MemDir { Read, Write };

struct MemPort {
  std::string process;
  std::string array;
  MemDir dir = MemDir::Read;
};

enum class HostOpKind { TransferToDev, TransferToHost, Launch, TimeLoop, HostCompute };

struct HostOp {
  HostOpKind kind = HostOpKind::Launch;
  std::vector<std::string> arrays;     // transfers
  std::vector<std::string> processes;  // launch group
  int irNode = -1;                     // host compute
  std::int64_t count = 0;              // time loop
  std::vector<HostOp> body;            // time loop
};

struct ArrayInfo {
  std::string name;
  BaseType type = BaseType::Real;
  Shape shape;
};

struct PipelineGraph {
  Variant variant = Variant::Baseline;
  std::shared_ptr<const FunctionalIR> ir;
  std::vector<ArrayInfo> arrays;
  std::vector<KernelNode> kernels;
  std::vector<ChannelEdge> channels;
  std::vector<SmartCacheSpec> smartCaches;
  std::vector<MemPort> memPorts;
  std::vector<HostOp> hostPlan;
  /// Arrays read and written by the same launch group; they travel
  /// between time steps through global memory.
  std::vector<std::string> recirculated;
  std::int64_t capacity = 64;
  std::int64_t budget = 1 << 16;

  const KernelNode* kernel(const std::string& name) const;
  const ChannelEdge* channel(const std::string& name) const;
  const SmartCacheSpec* cache(const std::string& streamId) const;
  const ArrayInfo* array(const std::string& name) const;
  /// Every launch group inside the time loop, in order.
  std::vector<std::vector<std::string>> launch_groups() const;

  /// Throws LoweringError on dangling channels or mismatched port types.
  void validate() const;
  std::string to_json() const;
};

struct LowerOptions {
  std::int64_t capacity = 64;
  std::int64_t budget = 1 << 16;
  BoundaryPolicy boundary = BoundaryPolicy::Clamp;
};

PipelineGraph lower(const FunctionalIR& ir, Variant variant, const LowerOptions& opts = {});

/// Set every channel's base capacity. Skews do not depend on it.
void set_capacity(PipelineGraph& g, std::int64_t capacity);

struct TransferSchedule {
  std::set<std::string> onceToDevice;
  std::set<std::string> perStepToDevice;
  std::set<std::string> onceToHost;
  std::set<std::string> perStepToHost;
};

/// Where the host program touches each array.
struct HostUse {
  std::set<std::string> initialized;  // written before the time loop
  std::set<std::string> readInLoop;
  std::set<std::string> writtenInLoop;
  std::set<std::string> readAfter;
};

HostUse host_use(const FunctionalIR& ir);
TransferSchedule minimize_transfers(const PipelineGraph& g, const HostUse& use);
/// Host plan that moves exactly the scheduled arrays.
std::vector<HostOp> plan_with(const PipelineGraph& g, const TransferSchedule& s);
/// Host plan that copies every array both ways around every step.
std::vector<HostOp> plan_transfer_everything(const PipelineGraph& g);

/// Kernel text keyed by file name `<kernel>_<variant>.clk`.
std::map<std::string, std::string> emit_kernels(const PipelineGraph& g);

/// What the loader recovers from kernel text.
struct KernelSignature {
  std::string name;
  std::vector<std::string> params;
  std::vector<std::string> globalArrays;  // params indexed as global arrays
  std::set<std::string> channelReads;
  std::set<std::string> channelWrites;
  int globalRefs = 0;  // subscripted uses of global arrays in the body
};

KernelSignature parse_kernel_text(const std::string& text);

}  // namespace sf
