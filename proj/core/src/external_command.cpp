#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <sstream>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "rembo/objectives.hpp"

extern char** environ;

namespace rembo {

namespace {

using Clock = std::chrono::steady_clock;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

struct SlotGuard {
  std::counting_semaphore<>& sem;
  explicit SlotGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
  ~SlotGuard() { sem.release(); }
};

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left < 0 ? 0 : static_cast<int>(left);
}

}  // namespace

std::optional<double> parse_last_number(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::optional<double> last;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    double v = 0.0;
    const char* first = t.data();
    const char* end = t.data() + t.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, end, v);
    if (ec == std::errc() && ptr == end) last = v;
  }
  return last;
}

ExternalCommand::ExternalCommand(std::size_t D, CommandDescriptor command, std::optional<CategoricalTable> categories,
                                 Sense sense, std::optional<double> known_optimum)
    : D_(D),
      command_(std::move(command)),
      categories_(std::move(categories)),
      sense_(sense),
      optimum_(known_optimum) {
  if (D < 1) throw std::invalid_argument("external command: D must be >= 1");
  if (command_.program.empty()) throw std::invalid_argument("external command: program is empty");
  if (!(command_.timeout_seconds > 0.0)) throw std::invalid_argument("external command: timeout must be > 0");
  if (command_.max_concurrent < 1) throw std::invalid_argument("external command: max_concurrent must be >= 1");
  if (categories_) categories_->validate(D);
  slots_ = std::make_shared<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(command_.max_concurrent));
}

std::vector<std::string> ExternalCommand::render_args(const std::vector<std::string>& values) const {
  std::vector<std::string> argv;
  for (const auto& tmpl : command_.args) {
    if (tmpl.find("{i}") == std::string::npos && tmpl.find("{v}") == std::string::npos) {
      argv.push_back(tmpl);
      continue;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::string a = tmpl;
      replace_all(a, "{i}", std::to_string(i));
      replace_all(a, "{v}", values[i]);
      argv.push_back(std::move(a));
    }
  }
  return argv;
}

double ExternalCommand::evaluate(const Point& x) const {
  if (x.dim != D_) throw std::invalid_argument("external command: point dimension mismatch");
  if (categories_) {
    std::vector<int> cats(D_);
    for (std::size_t i = 0; i < D_; ++i) cats[i] = decode_coordinate(x.at(i), categories_->counts[i]);
    return evaluate_discrete(cats);
  }
  std::vector<std::string> values(D_);
  for (std::size_t i = 0; i < D_; ++i) values[i] = fmt::format("{}", x.at(i));
  return run(values);
}

double ExternalCommand::evaluate_discrete(std::span<const int> categories) const {
  if (categories.size() != D_) throw std::invalid_argument("external command: category vector length mismatch");
  std::vector<std::string> values(D_);
  for (std::size_t i = 0; i < D_; ++i) values[i] = std::to_string(categories[i]);
  return run(values);
}

double ExternalCommand::run(const std::vector<std::string>& values) const {
  SlotGuard slot(*slots_);

  std::vector<std::string> args = render_args(values);
  std::vector<char*> argv;
  argv.push_back(const_cast<char*>(command_.program.c_str()));
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  int fds[2];
  if (pipe2(fds, O_CLOEXEC) != 0) {
    throw EvaluationFailure(EvaluationFailure::Kind::Spawn, std::string("pipe: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);

  // Own process group, so a timeout also reaches anything the child started.
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  pid_t pid = -1;
  const int rc = posix_spawnp(&pid, command_.program.c_str(), &actions, &attr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  close(fds[1]);
  if (rc != 0) {
    close(fds[0]);
    throw EvaluationFailure(EvaluationFailure::Kind::Spawn,
                            "cannot start '" + command_.program + "': " + std::strerror(rc));
  }

  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(command_.timeout_seconds));
  std::string out;
  bool timed_out = false;
  char buf[4096];
  while (true) {
    pollfd p{fds[0], POLLIN, 0};
    const int ready = poll(&p, 1, remaining_ms(deadline));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) {
      timed_out = true;
      break;
    }
    const ssize_t n = read(fds[0], buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }
  close(fds[0]);

  int status = 0;
  while (!timed_out) {
    const pid_t w = waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) break;
    if (Clock::now() >= deadline) {
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  if (timed_out) {
    kill(-pid, SIGKILL);
    waitpid(pid, &status, 0);
    throw EvaluationFailure(EvaluationFailure::Kind::Timeout,
                            fmt::format("'{}' exceeded {} s", command_.program, command_.timeout_seconds));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw EvaluationFailure(EvaluationFailure::Kind::NonzeroExit,
                            fmt::format("'{}' exited with status {}", command_.program,
                                        WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }
  const auto value = parse_last_number(out);
  if (!value) {
    throw EvaluationFailure(EvaluationFailure::Kind::Unparseable,
                            fmt::format("'{}' printed no numeric line", command_.program));
  }
  return *value;
}

}  // namespace rembo
