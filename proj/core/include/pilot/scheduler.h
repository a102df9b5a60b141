#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pilot/resources.h"
#include "pilot/task.h"

namespace pilot {

// Nodes of a pilot allocation. The first `agent_nodes` nodes are reserved
// for the runtime; tasks are placed on the remaining worker nodes only.
class ResourcePool {
 public:
  ResourcePool(std::vector<Node> nodes, int agent_nodes);

  static ResourcePool uniform(int nodes, int cores_per_node, int gpus_per_node,
                              int agent_nodes);

  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Node> agent_nodes() const;
  std::span<const Node> worker_nodes() const;
  int agent_node_count() const { return agent_nodes_; }

  int worker_cores() const { return worker_cores_; }
  int worker_gpus() const { return worker_gpus_; }
  int free_cores() const { return free_cores_; }
  int free_gpus() const { return free_gpus_; }
  int bound_cores() const { return worker_cores_ - free_cores_; }
  std::size_t live_bindings() const { return live_bindings_; }

  // First-fit: the first worker node (id order) that can hold the whole
  // request, lowest free indices first; otherwise spill across nodes in the
  // same order. Returns nullopt when there is not enough free capacity, in
  // which case the pool is unchanged.
  std::optional<Slot> try_schedule(const TaskSpec& spec);

  // Frees every resource of a live slot. Throws DoubleFree if the slot is
  // not currently bound (already released or never issued).
  void unschedule(const Slot& slot);

  // 0 when free, otherwise the binding id holding the unit.
  std::uint64_t core_owner(int node_id, int core) const;
  std::uint64_t gpu_owner(int node_id, int gpu) const;

 private:
  struct Occupancy {
    std::vector<std::uint64_t> cores;
    std::vector<std::uint64_t> gpus;
    int free_cores = 0;
    int free_gpus = 0;
  };

  std::size_t index_of(int node_id) const;
  void take(std::size_t idx, int ncores, int ngpus, std::uint64_t binding,
            Assignment& out);

  std::vector<Node> nodes_;
  int agent_nodes_;
  std::vector<Occupancy> occ_;  // parallel to nodes_
  std::vector<std::size_t> index_by_id_;
  int min_id_ = 0;
  int worker_cores_ = 0;
  int worker_gpus_ = 0;
  int free_cores_ = 0;
  int free_gpus_ = 0;
  std::size_t live_bindings_ = 0;
  std::uint64_t next_binding_ = 1;
};

}  // namespace pilot
