#include "pilot/local_exec.h"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

extern char** environ;

namespace pilot {

LocalExecBackend::LocalExecBackend(Clock& clock, LaunchBackendProfile profile,
                                   std::filesystem::path stdio_dir)
    : LaunchBackend(std::move(profile)), clock_(clock), stdio_dir_(std::move(stdio_dir)) {
  std::filesystem::create_directories(stdio_dir_);
}

LocalExecBackend::~LocalExecBackend() { terminate(); }

StdioPaths LocalExecBackend::stdio_for(const TaskSpec& spec) const {
  StdioPaths p = spec.stdio;
  if (p.in.empty()) p.in = (stdio_dir_ / (spec.id + ".in")).string();
  if (p.out.empty()) p.out = (stdio_dir_ / (spec.id + ".out")).string();
  if (p.err.empty()) p.err = (stdio_dir_ / (spec.id + ".err")).string();
  return p;
}

void LocalExecBackend::close_fds(Child& c) {
  for (int& fd : c.fds) {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
}

SubmitStatus LocalExecBackend::dispatch(const TaskSpec& spec, const Slot&, Duration,
                                        Rng&) {
  const StdioPaths paths = stdio_for(spec);
  Child child;
  child.task_id = spec.id;
  child.fds[0] = ::open(paths.in.c_str(), O_RDONLY | O_CREAT | O_CLOEXEC, 0644);
  child.fds[1] = ::open(paths.out.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  child.fds[2] = ::open(paths.err.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  for (int fd : child.fds) {
    if (fd < 0) {
      close_fds(child);
      return SubmitStatus::kFdExhausted;
    }
  }

  std::vector<std::string> argv_s;
  if (spec.command) {
    argv_s.push_back(spec.command->executable);
    argv_s.insert(argv_s.end(), spec.command->args.begin(), spec.command->args.end());
  } else {
    argv_s = {"sleep", format_seconds(spec.duration)};
  }
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);

  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  for (int i = 0; i < 3; ++i) posix_spawn_file_actions_adddup2(&fa, child.fds[i], i);
  pid_t pid = -1;
  const int rc = posix_spawnp(&pid, argv[0], &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  if (rc != 0) {
    close_fds(child);
    throw std::runtime_error("posix_spawnp " + argv_s[0] + ": " + std::strerror(rc));
  }
  {
    std::lock_guard lk(mu_);
    children_.emplace(pid, std::move(child));
  }
  if (auto* l = listener()) l->on_running(spec.id, clock_.now());
  return SubmitStatus::kAccepted;
}

void LocalExecBackend::poll() {
  bool any = false;
  {
    std::lock_guard lk(mu_);
    for (auto it = children_.begin(); it != children_.end();) {
      int status = 0;
      const pid_t r = ::waitpid(it->first, &status, WNOHANG);
      if (r == it->first) {
        int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
        close_fds(it->second);
        ready_.push_back(Completion{it->second.task_id, code, clock_.now()});
        it = children_.erase(it);
        any = true;
      } else {
        ++it;
      }
    }
  }
  if (any) {
    if (auto* l = listener()) l->on_completions_ready();
  }
}

std::vector<Completion> LocalExecBackend::collect_completions() {
  std::lock_guard lk(mu_);
  std::vector<Completion> out;
  out.swap(ready_);
  return out;
}

std::size_t LocalExecBackend::live() const {
  std::lock_guard lk(mu_);
  return children_.size();
}

void LocalExecBackend::terminate() {
  std::lock_guard lk(mu_);
  for (auto& [pid, child] : children_) {
    ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
    close_fds(child);
  }
  children_.clear();
}

}  // namespace pilot
