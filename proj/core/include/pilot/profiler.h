#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pilot/time.h"

namespace pilot {

enum class EntityKind { kPilot, kTask, kDvmJob, kExecutor };
enum class Component { kClient, kAgent, kScheduler, kExecutor, kDvm, kPayload };

std::string_view to_string(EntityKind k);
std::string_view to_string(Component c);
std::optional<EntityKind> parse_entity_kind(std::string_view s);
std::optional<Component> parse_component(std::string_view s);

using Attrs = std::vector<std::pair<std::string, std::string>>;

struct Event {
  Duration t{0};
  EntityKind kind = EntityKind::kPilot;
  std::string entity_id;
  Component component = Component::kAgent;
  std::string name;
  Attrs attrs;

  std::optional<std::string_view> attr(std::string_view key) const;
  bool operator==(const Event&) const = default;
};

// Well-known event names.
namespace ev {
inline constexpr std::string_view kPilotStart = "pilot_start";
inline constexpr std::string_view kAgentReady = "agent_ready";
inline constexpr std::string_view kWorkloadReceived = "workload_received";
inline constexpr std::string_view kPilotStop = "pilot_stop";
inline constexpr std::string_view kNew = "new";
inline constexpr std::string_view kScheduleOk = "schedule_ok";
inline constexpr std::string_view kSubmit = "submit";
inline constexpr std::string_view kLaunch = "launch";
inline constexpr std::string_view kRunning = "running";
inline constexpr std::string_view kDone = "done";
inline constexpr std::string_view kFailed = "failed";
inline constexpr std::string_view kCanceled = "canceled";
inline constexpr std::string_view kUnschedule = "unschedule";
}  // namespace ev

// One line: t_s,entity_kind,entity_id,component,name,attrs with attrs as
// key=value pairs joined by ';'. Separator characters and '%' inside fields
// are percent-encoded, so any printable text round-trips.
std::string format_event(const Event& e);
Event parse_event(std::string_view line, std::size_t line_no = 0);

// Append-only event log shared by every component of a run. Events are kept
// in memory and, when opened on a path, streamed to a buffered file.
// Thread-safe; each producer's events keep their call order.
class ProfileSink {
 public:
  ProfileSink() = default;
  explicit ProfileSink(const std::filesystem::path& path);
  ProfileSink(const ProfileSink&) = delete;
  ProfileSink& operator=(const ProfileSink&) = delete;
  ~ProfileSink();

  void record(Event e);
  void record(Duration t, EntityKind kind, std::string entity_id, Component component,
              std::string_view name, Attrs attrs = {});

  void flush();
  void close();
  bool closed() const;

  std::vector<Event> events() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<Event> events_;
  std::optional<std::ofstream> out_;
  bool closed_ = false;
};

// Reads a profile log and returns its events sorted by time (stable, so
// equal-time events keep file order). Throws ParseError naming the line.
std::vector<Event> load_profile(const std::filesystem::path& path);
void sort_events(std::vector<Event>& events);

}  // namespace pilot
