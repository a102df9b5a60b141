#include "pilot/profiler.h"

#include <algorithm>
#include <stdexcept>

#include "pilot/error.h"

namespace pilot {

namespace {

constexpr std::string_view kKinds[] = {"Pilot", "Task", "DvmJob", "Executor"};
constexpr std::string_view kComponents[] = {"Client",   "Agent", "Scheduler",
                                            "Executor", "Dvm",   "Payload"};

bool needs_escape(char c) {
  return c == ',' || c == ';' || c == '=' || c == '%' || c == '\n' || c == '\r';
}

void escape_into(std::string& out, std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  for (char c : s) {
    if (needs_escape(c)) {
      auto u = static_cast<unsigned char>(c);
      out += '%';
      out += kHex[u >> 4];
      out += kHex[u & 0xF];
    } else {
      out += c;
    }
  }
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

std::string unescape(std::string_view s, std::size_t line_no) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out += s[i];
      continue;
    }
    if (i + 2 >= s.size()) {
      throw ParseError(line_no, "truncated escape");
    }
    int hi = hex_value(s[i + 1]);
    int lo = hex_value(s[i + 2]);
    if (hi < 0 || lo < 0) throw ParseError(line_no, "bad escape");
    out += static_cast<char>(hi * 16 + lo);
    i += 2;
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::string_view to_string(EntityKind k) { return kKinds[static_cast<int>(k)]; }
std::string_view to_string(Component c) { return kComponents[static_cast<int>(c)]; }

std::optional<EntityKind> parse_entity_kind(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (kKinds[i] == s) return static_cast<EntityKind>(i);
  }
  return std::nullopt;
}

std::optional<Component> parse_component(std::string_view s) {
  for (int i = 0; i < 6; ++i) {
    if (kComponents[i] == s) return static_cast<Component>(i);
  }
  return std::nullopt;
}

std::optional<std::string_view> Event::attr(std::string_view key) const {
  for (const auto& [k, v] : attrs) {
    if (k == key) return std::string_view(v);
  }
  return std::nullopt;
}

std::string format_event(const Event& e) {
  std::string line = format_seconds(e.t);
  line += ',';
  line += to_string(e.kind);
  line += ',';
  escape_into(line, e.entity_id);
  line += ',';
  line += to_string(e.component);
  line += ',';
  escape_into(line, e.name);
  line += ',';
  for (std::size_t i = 0; i < e.attrs.size(); ++i) {
    if (i) line += ';';
    escape_into(line, e.attrs[i].first);
    line += '=';
    escape_into(line, e.attrs[i].second);
  }
  return line;
}

Event parse_event(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto fields = split(line, ',');
  if (fields.size() != 6) {
    throw ParseError(line_no, "expected 6 comma-separated fields, got " +
                                  std::to_string(fields.size()));
  }
  Event e;
  try {
    e.t = parse_seconds(fields[0]);
  } catch (const std::invalid_argument& ex) {
    throw ParseError(line_no, ex.what());
  }
  if (e.t < Duration{0}) throw ParseError(line_no, "negative timestamp");
  auto kind = parse_entity_kind(fields[1]);
  if (!kind) throw ParseError(line_no, "unknown entity kind '" + std::string(fields[1]) + "'");
  e.kind = *kind;
  e.entity_id = unescape(fields[2], line_no);
  auto comp = parse_component(fields[3]);
  if (!comp) throw ParseError(line_no, "unknown component '" + std::string(fields[3]) + "'");
  e.component = *comp;
  e.name = unescape(fields[4], line_no);
  if (e.name.empty()) throw ParseError(line_no, "empty event name");
  if (!fields[5].empty()) {
    for (auto kv : split(fields[5], ';')) {
      auto eq = kv.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError(line_no, "attribute without '=': '" + std::string(kv) + "'");
      }
      e.attrs.emplace_back(unescape(kv.substr(0, eq), line_no),
                           unescape(kv.substr(eq + 1), line_no));
    }
  }
  return e;
}

ProfileSink::ProfileSink(const std::filesystem::path& path) {
  out_.emplace(path, std::ios::out | std::ios::trunc);
  if (!*out_) throw std::runtime_error("cannot open profile log " + path.string());
}

ProfileSink::~ProfileSink() {
  try {
    close();
  } catch (...) {
  }
}

void ProfileSink::record(Event e) {
  if (e.t < Duration{0}) throw std::invalid_argument("event time must be >= 0");
  std::lock_guard lock(mu_);
  if (closed_) throw SinkClosed("profile sink is closed");
  if (out_) {
    *out_ << format_event(e) << '\n';
  }
  events_.push_back(std::move(e));
}

void ProfileSink::record(Duration t, EntityKind kind, std::string entity_id,
                         Component component, std::string_view name, Attrs attrs) {
  record(Event{t, kind, std::move(entity_id), component, std::string(name),
               std::move(attrs)});
}

void ProfileSink::flush() {
  std::lock_guard lock(mu_);
  if (out_) out_->flush();
}

void ProfileSink::close() {
  std::lock_guard lock(mu_);
  if (closed_) return;
  closed_ = true;
  if (out_) {
    out_->flush();
    out_->close();
  }
}

bool ProfileSink::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::vector<Event> ProfileSink::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::size_t ProfileSink::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

void sort_events(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
}

std::vector<Event> load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile log " + path.string());
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    events.push_back(parse_event(line, line_no));
  }
  sort_events(events);
  return events;
}

}  // namespace pilot
