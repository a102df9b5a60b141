#include "pilot/scheduler.h"

#include <algorithm>
#include <charconv>
#include <stdexcept>
#include <string>

#include "pilot/error.h"

namespace pilot {

int Slot::total_cores() const {
  int n = 0;
  for (const auto& a : assignments) n += static_cast<int>(a.cores.size());
  return n;
}

int Slot::total_gpus() const {
  int n = 0;
  for (const auto& a : assignments) n += static_cast<int>(a.gpus.size());
  return n;
}

namespace {

void append_ranges(std::string& out, const std::vector<int>& idx) {
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && idx[j + 1] == idx[j] + 1) ++j;
    if (i != 0) out += '+';
    out += std::to_string(idx[i]);
    if (j > i) {
      out += '-';
      out += std::to_string(idx[j]);
    }
    i = j + 1;
  }
}

int parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("bad integer '" + std::string(s) + "' in slot");
  }
  return v;
}

std::vector<int> parse_ranges(std::string_view s) {
  std::vector<int> out;
  while (!s.empty()) {
    auto plus = s.find('+');
    auto part = s.substr(0, plus);
    auto dash = part.find('-');
    if (dash == std::string_view::npos) {
      out.push_back(parse_int(part));
    } else {
      int a = parse_int(part.substr(0, dash));
      int b = parse_int(part.substr(dash + 1));
      if (b < a) throw std::invalid_argument("descending range in slot");
      for (int i = a; i <= b; ++i) out.push_back(i);
    }
    if (plus == std::string_view::npos) break;
    s.remove_prefix(plus + 1);
  }
  return out;
}

}  // namespace

std::string Slot::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (i) out += '/';
    out += std::to_string(assignments[i].node_id);
    out += ':';
    append_ranges(out, assignments[i].cores);
    out += ':';
    append_ranges(out, assignments[i].gpus);
  }
  return out;
}

Slot Slot::parse(std::string_view text) {
  Slot slot;
  while (!text.empty()) {
    auto slash = text.find('/');
    auto seg = text.substr(0, slash);
    auto c1 = seg.find(':');
    auto c2 = c1 == std::string_view::npos ? c1 : seg.find(':', c1 + 1);
    if (c2 == std::string_view::npos) {
      throw std::invalid_argument("malformed slot segment '" + std::string(seg) + "'");
    }
    Assignment a;
    a.node_id = parse_int(seg.substr(0, c1));
    a.cores = parse_ranges(seg.substr(c1 + 1, c2 - c1 - 1));
    a.gpus = parse_ranges(seg.substr(c2 + 1));
    slot.assignments.push_back(std::move(a));
    if (slash == std::string_view::npos) break;
    text.remove_prefix(slash + 1);
  }
  return slot;
}

ResourcePool::ResourcePool(std::vector<Node> nodes, int agent_nodes)
    : nodes_(std::move(nodes)), agent_nodes_(agent_nodes) {
  if (nodes_.empty()) throw std::invalid_argument("resource pool needs at least one node");
  if (agent_nodes_ < 0 || agent_nodes_ >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("agent_nodes must be in [0, nodes)");
  }
  int max_id = nodes_.front().id;
  min_id_ = nodes_.front().id;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.cores < 0 || n.gpus < 0) throw std::invalid_argument("negative node resources");
    if (i > 0 && n.id <= nodes_[i - 1].id) {
      throw std::invalid_argument("node ids must be strictly increasing");
    }
    max_id = std::max(max_id, n.id);
  }
  index_by_id_.assign(static_cast<std::size_t>(max_id - min_id_ + 1), SIZE_MAX);
  occ_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    index_by_id_[static_cast<std::size_t>(n.id - min_id_)] = i;
    occ_[i].cores.assign(static_cast<std::size_t>(n.cores), 0);
    occ_[i].gpus.assign(static_cast<std::size_t>(n.gpus), 0);
    occ_[i].free_cores = n.cores;
    occ_[i].free_gpus = n.gpus;
    if (static_cast<int>(i) >= agent_nodes_) {
      worker_cores_ += n.cores;
      worker_gpus_ += n.gpus;
    }
  }
  free_cores_ = worker_cores_;
  free_gpus_ = worker_gpus_;
}

ResourcePool ResourcePool::uniform(int nodes, int cores_per_node, int gpus_per_node,
                                   int agent_nodes) {
  if (nodes < 1) throw std::invalid_argument("pool needs at least one node");
  std::vector<Node> list;
  list.reserve(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) list.push_back(Node{i, cores_per_node, gpus_per_node});
  return ResourcePool(std::move(list), agent_nodes);
}

std::span<const Node> ResourcePool::agent_nodes() const {
  return std::span<const Node>(nodes_).first(static_cast<std::size_t>(agent_nodes_));
}

std::span<const Node> ResourcePool::worker_nodes() const {
  return std::span<const Node>(nodes_).subspan(static_cast<std::size_t>(agent_nodes_));
}

std::size_t ResourcePool::index_of(int node_id) const {
  const long off = static_cast<long>(node_id) - min_id_;
  if (off < 0 || off >= static_cast<long>(index_by_id_.size()) ||
      index_by_id_[static_cast<std::size_t>(off)] == SIZE_MAX) {
    throw std::out_of_range("node " + std::to_string(node_id) + " is not in the pool");
  }
  return index_by_id_[static_cast<std::size_t>(off)];
}

void ResourcePool::take(std::size_t idx, int ncores, int ngpus, std::uint64_t binding,
                        Assignment& out) {
  auto& o = occ_[idx];
  out.node_id = nodes_[idx].id;
  for (std::size_t c = 0; c < o.cores.size() && ncores > 0; ++c) {
    if (o.cores[c] == 0) {
      o.cores[c] = binding;
      out.cores.push_back(static_cast<int>(c));
      --ncores;
      --o.free_cores;
      --free_cores_;
    }
  }
  for (std::size_t g = 0; g < o.gpus.size() && ngpus > 0; ++g) {
    if (o.gpus[g] == 0) {
      o.gpus[g] = binding;
      out.gpus.push_back(static_cast<int>(g));
      --ngpus;
      --o.free_gpus;
      --free_gpus_;
    }
  }
}

std::optional<Slot> ResourcePool::try_schedule(const TaskSpec& spec) {
  if (spec.cores < 1 || spec.gpus < 0) throw std::invalid_argument("invalid task request");
  if (spec.cores > free_cores_ || spec.gpus > free_gpus_) return std::nullopt;

  Slot slot;
  slot.binding = next_binding_;
  const std::size_t first = static_cast<std::size_t>(agent_nodes_);
  for (std::size_t i = first; i < nodes_.size(); ++i) {
    if (occ_[i].free_cores >= spec.cores && occ_[i].free_gpus >= spec.gpus) {
      Assignment a;
      take(i, spec.cores, spec.gpus, slot.binding, a);
      slot.assignments.push_back(std::move(a));
      ++next_binding_;
      ++live_bindings_;
      return slot;
    }
  }

  // Spill: enough in aggregate (checked above) but no single node fits.
  int need_c = spec.cores;
  int need_g = spec.gpus;
  for (std::size_t i = first; i < nodes_.size() && (need_c > 0 || need_g > 0); ++i) {
    int c = std::min(need_c, occ_[i].free_cores);
    int g = std::min(need_g, occ_[i].free_gpus);
    if (c == 0 && g == 0) continue;
    Assignment a;
    take(i, c, g, slot.binding, a);
    need_c -= c;
    need_g -= g;
    slot.assignments.push_back(std::move(a));
  }
  ++next_binding_;
  ++live_bindings_;
  return slot;
}

void ResourcePool::unschedule(const Slot& slot) {
  if (slot.binding == 0) throw DoubleFree("slot was never bound");
  // Validate everything before mutating so a bad release leaves the pool intact.
  for (const auto& a : slot.assignments) {
    const auto& o = occ_[index_of(a.node_id)];
    for (int c : a.cores) {
      if (c < 0 || c >= static_cast<int>(o.cores.size()) ||
          o.cores[static_cast<std::size_t>(c)] != slot.binding) {
        throw DoubleFree("core " + std::to_string(a.node_id) + ":" + std::to_string(c) +
                         " is not held by binding " + std::to_string(slot.binding));
      }
    }
    for (int g : a.gpus) {
      if (g < 0 || g >= static_cast<int>(o.gpus.size()) ||
          o.gpus[static_cast<std::size_t>(g)] != slot.binding) {
        throw DoubleFree("gpu " + std::to_string(a.node_id) + ":" + std::to_string(g) +
                         " is not held by binding " + std::to_string(slot.binding));
      }
    }
  }
  for (const auto& a : slot.assignments) {
    auto& o = occ_[index_of(a.node_id)];
    for (int c : a.cores) {
      o.cores[static_cast<std::size_t>(c)] = 0;
      ++o.free_cores;
      ++free_cores_;
    }
    for (int g : a.gpus) {
      o.gpus[static_cast<std::size_t>(g)] = 0;
      ++o.free_gpus;
      ++free_gpus_;
    }
  }
  --live_bindings_;
}

std::uint64_t ResourcePool::core_owner(int node_id, int core) const {
  return occ_[index_of(node_id)].cores.at(static_cast<std::size_t>(core));
}

std::uint64_t ResourcePool::gpu_owner(int node_id, int gpu) const {
  return occ_[index_of(node_id)].gpus.at(static_cast<std::size_t>(gpu));
}

}  // namespace pilot
