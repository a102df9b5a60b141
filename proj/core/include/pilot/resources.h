#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pilot {

struct Node {
  int id = 0;
  int cores = 0;
  int gpus = 0;
};

// Cores and GPUs of one node held by a task.
struct Assignment {
  int node_id = 0;
  std::vector<int> cores;
  std::vector<int> gpus;

  bool operator==(const Assignment&) const = default;
};

// A concrete placement. `binding` is the pool-issued id of the live binding
// and is what lets the pool reject a second release of the same slot.
struct Slot {
  std::uint64_t binding = 0;
  std::vector<Assignment> assignments;

  int total_cores() const;
  int total_gpus() const;

  // "node:cores:gpus" segments joined by '/', index lists as ranges joined
  // by '+', e.g. "3:0-3+7:" or "4:0-41:0/5:0-1:".
  std::string to_string() const;
  static Slot parse(std::string_view text);

  bool operator==(const Slot&) const = default;
};

}  // namespace pilot
